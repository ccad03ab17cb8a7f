//! Exponential fits of the phase-removed covariance and their comparison with
//! the kinetic prediction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::fit_line;
use crate::stats::{jackknife, jackknife_stderr};

use super::covariance::{estimate_f2_grouped, CovarianceSeries};
use super::runner::Ensemble;

/// Minimal signal-to-noise ratio of a usable point.
pub const MIN_SNR: f64 = 3.0;
/// Minimal number of usable times per mode.
pub const MIN_POINTS: usize = 4;

/// Fit and prediction at one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub k: Vec<f64>,
    /// Whether enough points passed the signal-to-noise cut.
    pub fit: bool,
    pub points: usize,
    pub gamma1_fit: f64,
    pub gamma1_err: f64,
    pub gamma2_fit: f64,
    pub gamma2_err: f64,
    pub gamma1_pred: Option<f64>,
    pub gamma2_pred: Option<f64>,
    /// `Γ̂₁/Γ₁` when both are available.
    pub ratio: Option<f64>,
    /// `χ²` of the weighted log-modulus fit.
    pub chi2: f64,
}

/// Per-mode fitted rates against the kinetic prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub lambda: f64,
    pub n_real: usize,
    pub modes: Vec<ModeComparison>,
}

impl ComparisonReport {
    /// Modes with a fit and a nonzero prediction.
    pub fn resolved(&self) -> impl Iterator<Item = &ModeComparison> {
        self.modes.iter().filter(|m| m.fit && m.ratio.is_some())
    }
}

/// Fits `value ≈ A e^{−Γ̂₁t − iΓ̂₂t}` at each mode by weighted least squares
/// on `log|value|` and on the unwrapped phase, using nonnegative times with
/// `|value| ≥ 3·stderr`.  `predicted[i]` is the kinetic `Γ` at mode `i`.
pub fn fit_decay(series: &CovarianceSeries, predicted: &[Option<Complex64>]) -> ComparisonReport {
    let mut modes = Vec::with_capacity(series.k.len());
    for (i, k) in series.k.iter().enumerate() {
        let mut order: Vec<usize> = (0..series.t.len()).filter(|&r| series.t[r] >= 0.0).collect();
        order.sort_by(|a, b| series.t[*a].total_cmp(&series.t[*b]));
        let usable: Vec<usize> = order
            .into_iter()
            .filter(|&r| {
                let s = series.stderr(i, r);
                let v = series.value[i][r].norm();
                v > 0.0 && (s == 0.0 || v >= MIN_SNR * s)
            })
            .collect();
        let pred = predicted.get(i).copied().flatten();
        let mut m = ModeComparison {
            k: k.clone(),
            fit: false,
            points: usable.len(),
            gamma1_fit: f64::NAN,
            gamma1_err: f64::NAN,
            gamma2_fit: f64::NAN,
            gamma2_err: f64::NAN,
            gamma1_pred: pred.map(|g| g.re),
            gamma2_pred: pred.map(|g| g.im),
            ratio: None,
            chi2: f64::NAN,
        };
        if usable.len() >= MIN_POINTS {
            let t: Vec<f64> = usable.iter().map(|&r| series.t[r]).collect();
            let logs: Vec<f64> = usable.iter().map(|&r| series.value[i][r].norm().ln()).collect();
            let mut phases = Vec::with_capacity(usable.len());
            let mut prev = 0.0;
            for (j, &r) in usable.iter().enumerate() {
                let mut a = series.value[i][r].arg();
                if j > 0 {
                    a += (2.0 * std::f64::consts::PI) * ((prev - a) / (2.0 * std::f64::consts::PI)).round();
                }
                phases.push(a);
                prev = a;
            }
            let sig: Vec<f64> = usable.iter().map(|&r| (series.stderr(i, r) / series.value[i][r].norm()).max(1e-15)).collect();
            if let (Some(a), Some(b)) = (fit_line(&t, &logs, Some(&sig)), fit_line(&t, &phases, Some(&sig))) {
                m.fit = true;
                m.gamma1_fit = -a.slope;
                m.gamma1_err = a.slope_err;
                m.gamma2_fit = -b.slope;
                m.gamma2_err = b.slope_err;
                m.chi2 = a.chi2;
                m.ratio = pred.filter(|g| g.re != 0.0).map(|g| m.gamma1_fit / g.re);
            }
        }
        modes.push(m);
    }
    ComparisonReport { lambda: series.lambda, n_real: series.n_real, modes }
}

/// Decay trend of one mode group with jackknife errors over blocks of
/// realizations, which account for the correlation between record times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub k: Vec<f64>,
    pub orbit_size: usize,
    /// Unweighted least-squares decay rate of `log|F̂₂|` and its jackknife error.
    pub gamma1_fit: f64,
    pub gamma1_err: f64,
    pub gamma1_pred: Option<f64>,
    pub ratio: Option<f64>,
    /// `|F̂₂(t_{r+1})| − |F̂₂(t_r)|` over the sorted nonnegative times, with
    /// jackknife errors.
    pub increments: Vec<f64>,
    pub increment_err: Vec<f64>,
    /// `|F̂₂(t_last)| − |F̂₂(t_first)|` with its jackknife error.
    pub total_change: f64,
    pub total_change_err: f64,
}

impl TrendReport {
    /// Whether no increment exceeds `z` jackknife errors.
    pub fn monotone(&self, z: f64) -> bool {
        self.increments.iter().zip(&self.increment_err).all(|(d, e)| *d <= z * e)
    }

    /// Whether `|F̂₂|` falls over the whole range by more than `z` errors.
    pub fn decreasing(&self, z: f64) -> bool {
        -self.total_change > z * self.total_change_err
    }

    /// Whether the rate is determined to relative accuracy `rel` of the
    /// prediction.
    pub fn resolved(&self, rel: f64) -> bool {
        matches!(self.gamma1_pred, Some(g) if g > 0.0 && self.gamma1_err <= rel * g)
    }
}

fn trend_statistics(series: &CovarianceSeries, order: &[usize]) -> Vec<Vec<f64>> {
    let t: Vec<f64> = order.iter().map(|&r| series.t[r]).collect();
    series
        .value
        .iter()
        .map(|row| {
            let mods: Vec<f64> = order.iter().map(|&r| row[r].norm()).collect();
            let logs: Vec<f64> = mods.iter().map(|m| m.ln()).collect();
            let slope = fit_line(&t, &logs, None).map_or(f64::NAN, |f| f.slope);
            let mut out = vec![-slope];
            out.extend(mods.windows(2).map(|w| w[1] - w[0]));
            out.push(mods[mods.len() - 1] - mods[0]);
            out
        })
        .collect()
}

/// Jackknife trend analysis of grouped series over `blocks` contiguous
/// blocks of realizations.  `predicted[i]` is the kinetic `Γ` of group `i`.
pub fn decay_trend(
    ensemble: &Ensemble,
    groups: &[Vec<usize>],
    times: &[f64],
    predicted: &[Option<Complex64>],
    blocks: usize,
) -> Result<Vec<TrendReport>> {
    let full = estimate_f2_grouped(ensemble, groups, times, 1)?;
    let mut order: Vec<usize> = (0..full.t.len()).filter(|&r| full.t[r] >= 0.0).collect();
    order.sort_by(|a, b| full.t[*a].total_cmp(&full.t[*b]));
    if order.len() < 3 {
        return Err(Error::InvalidInput("the trend needs at least three nonnegative times".into()));
    }
    let n = ensemble.realizations.len();
    let (whole, leave_out) = jackknife(n, blocks, |keep| -> Result<Vec<Vec<f64>>> {
        let mut sub = ensemble.clone();
        sub.realizations = ensemble.realizations.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, r)| r.clone()).collect();
        Ok(trend_statistics(&estimate_f2_grouped(&sub, groups, times, 1)?, &order))
    });
    let whole = whole?;
    let leave_out: Vec<Vec<Vec<f64>>> = leave_out.into_iter().collect::<Result<_>>()?;
    let err = |i: usize, j: usize| jackknife_stderr(&leave_out.iter().map(|l| l[i][j]).collect::<Vec<f64>>());
    Ok(groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let pred = predicted.get(i).copied().flatten().map(|z| z.re);
            let stats = &whole[i];
            let last = stats.len() - 1;
            TrendReport {
                k: full.k[i].clone(),
                orbit_size: g.len(),
                gamma1_fit: stats[0],
                gamma1_err: err(i, 0),
                gamma1_pred: pred,
                ratio: pred.filter(|p| *p != 0.0).map(|p| stats[0] / p),
                increments: stats[1..last].to_vec(),
                increment_err: (1..last).map(|j| err(i, j)).collect(),
                total_change: stats[last],
                total_change_err: err(i, last),
            }
        })
        .collect())
}

/// Gnuplot script plotting `|value|` against `t` for each mode of a CSV
/// written by [`CovarianceSeries::write_csv`].
pub fn gnuplot_script(series: &CovarianceSeries, csv_name: &str) -> String {
    let d = series.d;
    let t = d + 1;
    let (re, im) = (d + 2, d + 3);
    let mut s = String::from("set datafile separator ','\nset key outside\nset xlabel 't (kinetic units)'\nset ylabel '|F2|'\n");
    let plots: Vec<String> = series
        .k
        .iter()
        .map(|k| {
            let cond: Vec<String> = k.iter().enumerate().map(|(a, v)| format!("abs(${} - {v}) < 1e-9", a + 1)).collect();
            format!(
                "'{csv_name}' every ::1 using (({}) ? ${t} : NaN):(sqrt(${re}**2 + ${im}**2)) with linespoints title 'k={:?}'",
                cond.join(" && "),
                k
            )
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&plots.join(", \\\n     "));
    s.push('\n');
    s
}
