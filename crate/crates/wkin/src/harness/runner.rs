//! Ensemble generation: Gibbs initial data, split-step evolution of each
//! realization and the reproducibility manifest.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_modes, IntegratorConfig};
use crate::error::{Error, Result};
use crate::gibbs::{estimate_r0, r0_first_order, realization_rng, sample_gaussian, EnsembleStats, LatticeModel, MetropolisChain, MetropolisConfig};
use crate::lattice::{FieldState, Representation};
use crate::stats::Estimate;

use super::config::ExperimentConfig;

/// One realization: the initial spectral modes and their values at each
/// record time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub initial: Vec<Complex64>,
    /// `values[r][j]` is `ψ̂_t(k_j)` at record time `times[r]`.
    pub values: Vec<Vec<Complex64>>,
    /// Largest relative drift of the particle number along the run.
    pub n_drift: f64,
}

/// Trajectories of one coupling sharing lattice, parameters, modes and
/// record times.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub model: LatticeModel,
    pub modes: Vec<usize>,
    /// Microscopic record times; negative times are reached by time reversal.
    pub times: Vec<f64>,
    pub realizations: Vec<Realization>,
    /// `R₀ = 2E|ψ(0)|²` estimated from the initial fields.
    pub r0: Estimate,
    /// Leading-order analytic `R₀`, reported alongside.
    pub r0_analytic: f64,
}

impl Ensemble {
    /// Checks that every realization matches the declared modes and times.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.realizations.iter().enumerate() {
            if r.initial.len() != self.modes.len()
                || r.values.len() != self.times.len()
                || r.values.iter().any(|v| v.len() != self.modes.len())
            {
                return Err(Error::InvalidInput(format!("realization {i} does not match the ensemble layout")));
            }
        }
        Ok(())
    }

    /// Joins two ensembles of the same model, modes and times.
    pub fn merge(&mut self, other: Ensemble) -> Result<()> {
        if self.model.lattice != other.model.lattice
            || self.model.params != other.model.params
            || self.modes != other.modes
            || self.times != other.times
        {
            return Err(Error::InvalidInput("mismatched ensembles".into()));
        }
        let (n1, n2) = (self.realizations.len() as f64, other.realizations.len() as f64);
        let value = (n1 * self.r0.value + n2 * other.r0.value) / (n1 + n2);
        let stderr = ((n1 * self.r0.stderr).powi(2) + (n2 * other.r0.stderr).powi(2)).sqrt() / (n1 + n2);
        self.r0 = Estimate::new(value, stderr);
        self.realizations.extend(other.realizations);
        Ok(())
    }
}

/// Seed stream of coupling number `i` derived from the master seed.
pub fn stream_seed(master: u64, i: usize) -> u64 {
    master ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Draws the initial field of realization `index`: exact Gaussian sampling
/// at `λ = 0`, a burned-in Metropolis chain otherwise.
pub fn initial_field(model: &LatticeModel, metropolis: MetropolisConfig, seed: u64, index: u64) -> Result<FieldState> {
    let mut rng = realization_rng(seed, index);
    if model.params.lambda == 0.0 {
        return Ok(sample_gaussian(model, &mut rng));
    }
    let mut chain = MetropolisChain::new(model, metropolis, rng)?;
    chain.burn_in()?;
    Ok(chain.next_state())
}

fn conj_site(field: &FieldState) -> FieldState {
    let site = field.to_site();
    FieldState { lattice: site.lattice, values: site.values.iter().map(|v| v.conj()).collect(), repr: Representation::Site }
}

/// Evolves one initial field and records `modes` at `times`.  Negative
/// times use `ψ_{−t} = (Φ_t ψ₀*)*`, which in Fourier space reads
/// `ψ̂_{−t}(k) = (ψ̂′_t(−k))*` for the run `ψ′` started from `ψ₀*`.
pub fn evolve_realization(field: &FieldState, model: &LatticeModel, dt: f64, modes: &[usize], times: &[f64]) -> Result<Realization> {
    let spec0 = field.to_spectral();
    let initial = modes.iter().map(|&k| spec0.values[k]).collect();
    let mut values = vec![Vec::new(); times.len()];
    let mut n_drift: f64 = 0.0;
    let n0: f64 = field.to_site().values.iter().map(|v| v.norm_sqr()).sum();
    for forward in [true, false] {
        let mut picked: Vec<(usize, f64)> =
            times.iter().enumerate().filter(|(_, t)| if forward { **t >= 0.0 } else { **t < 0.0 }).map(|(i, t)| (i, t.abs())).collect();
        if picked.is_empty() {
            continue;
        }
        picked.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut unique: Vec<f64> = picked.iter().map(|p| p.1).collect();
        unique.dedup();
        let cfg = IntegratorConfig::new(dt, unique.clone())?;
        let (start, run_modes): (FieldState, Vec<usize>) = if forward {
            (field.clone(), modes.to_vec())
        } else {
            (conj_site(field), modes.iter().map(|&k| model.lattice.neg_index(k)).collect())
        };
        let traj = evolve_modes(&start, &cfg, model, &run_modes)?;
        for rec in &traj.log {
            n_drift = n_drift.max((rec.n - n0).abs() / n0.max(f64::MIN_POSITIVE));
        }
        for (i, t) in picked {
            let r = unique.iter().position(|u| *u == t).expect("record time was scheduled");
            values[i] = if forward { traj.values[r].clone() } else { traj.values[r].iter().map(|v| v.conj()).collect() };
        }
    }
    Ok(Realization { initial, values, n_drift })
}

/// Runs the ensemble of coupling number `lambda_index` of `config`.
/// Realizations are scheduled on the rayon pool; each draws from its own
/// counter-based stream, so results do not depend on the thread count.
pub fn run_ensemble(config: &ExperimentConfig, lambda_index: usize) -> Result<Ensemble> {
    let lambda = *config
        .lambdas
        .get(lambda_index)
        .ok_or_else(|| Error::InvalidInput(format!("no coupling with index {lambda_index}")))?;
    let model = config.model(lambda)?;
    let modes = config.mode_indices()?;
    let times = config.micro_times(lambda);
    let dt = config.dt(lambda)?;
    let seed = stream_seed(config.seed, lambda_index);
    let metropolis = config.gibbs.metropolis;
    let outcomes: Vec<Result<(Realization, EnsembleStats)>> = (0..config.realizations)
        .into_par_iter()
        .map(|i| {
            let field = initial_field(&model, metropolis, seed, i as u64)?;
            let mut stats = EnsembleStats::new(model.lattice, 1);
            stats.push(&field, &model);
            Ok((evolve_realization(&field, &model, dt, &modes, &times)?, stats))
        })
        .collect();
    let mut realizations = Vec::with_capacity(outcomes.len());
    let mut stats = EnsembleStats::new(model.lattice, config.batch_size);
    for o in outcomes {
        let (r, s) = o?;
        stats.merge(&s);
        realizations.push(r);
    }
    let r0 = estimate_r0(&stats);
    let r0_analytic = r0_first_order(&model);
    Ok(Ensemble { model, modes, times, realizations, r0, r0_analytic })
}

/// Record of everything that determines a run bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub version: String,
    pub master_seed: u64,
    pub realizations: usize,
    pub streams: Vec<SeedStream>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedStream {
    pub lambda: f64,
    pub seed: u64,
    pub dt: f64,
}

impl SeedManifest {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let streams = config
            .lambdas
            .iter()
            .enumerate()
            .map(|(i, &lambda)| Ok(SeedStream { lambda, seed: stream_seed(config.seed, i), dt: config.dt(lambda)? }))
            .collect::<Result<_>>()?;
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: config.seed,
            realizations: config.realizations,
            streams,
            config: config.clone(),
        })
    }
}
