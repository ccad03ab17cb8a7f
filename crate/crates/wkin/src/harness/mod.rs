//! Experiment orchestration: ensembles on the kinetic time scale, the
//! phase-removed covariance, decay fits and their comparison with the
//! kinetic prediction.

pub mod config;
pub mod covariance;
pub mod fit;
pub mod runner;

use num_complex::Complex64;

use crate::kinetics::KineticRate;

pub use config::ExperimentConfig;
pub use covariance::{compute_q, cubic_orbit, estimate_f2, estimate_f2_all, estimate_f2_grouped, CovarianceSeries, QValue};
pub use fit::{decay_trend, fit_decay, ComparisonReport, ModeComparison, TrendReport};
pub use runner::{run_ensemble, Ensemble, SeedManifest};

/// Kinetic `Γ₁ + iΓ₂` at each momentum, `None` where the momentum is off
/// the rate grid or the rate did not converge.
pub fn predicted_rates(rate: &KineticRate, ks: &[Vec<f64>]) -> Vec<Option<Complex64>> {
    ks.iter()
        .map(|k| {
            let i = rate.index_of(k).ok()?;
            let g1 = rate.gamma1[i];
            let g2 = rate.gamma2[i];
            (g1.is_finite() && g2.is_finite()).then(|| Complex64::new(g1, g2))
        })
        .collect()
}
