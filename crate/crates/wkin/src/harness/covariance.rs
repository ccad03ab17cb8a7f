//! Phase-removed two-point covariance `F̂₂` and the quadratic form `Q`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;
use crate::stats::BatchMeans;

use super::runner::Ensemble;

/// Per-mode, per-time estimates of `e^{iω^λ(k)t}F̂₂(k,t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSeries {
    pub lambda: f64,
    pub d: usize,
    pub k: Vec<Vec<f64>>,
    /// Record times in kinetic units.
    pub t: Vec<f64>,
    /// Matching microscopic times.
    pub micro_t: Vec<f64>,
    /// `value[i][r]` at mode `k[i]` and time `t[r]`.
    pub value: Vec<Vec<Complex64>>,
    pub stderr_re: Vec<Vec<f64>>,
    pub stderr_im: Vec<Vec<f64>>,
    pub n_real: usize,
    /// `R₀` used for the phase removal, with its error and the analytic value.
    pub r0: f64,
    pub r0_stderr: f64,
    pub r0_analytic: f64,
}

fn kinetic_time(micro: f64, lambda: f64) -> f64 {
    if lambda > 0.0 {
        micro * lambda * lambda
    } else {
        micro
    }
}

fn position(haystack: &[usize], needle: usize) -> Result<usize> {
    haystack
        .iter()
        .position(|&x| x == needle)
        .ok_or_else(|| Error::InvalidInput(format!("mode {needle} was not recorded")))
}

fn time_position(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|&x| (x - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or_else(|| Error::InvalidInput(format!("time {t} was not recorded")))
}

/// Phase factor `e^{iω^λ(k)t}` with `ω^λ = ω + λR₀`.
fn phase(ensemble: &Ensemble, mode: usize, t: f64) -> Complex64 {
    let w = ensemble.model.omega()[mode] + ensemble.model.params.lambda * ensemble.r0.value;
    Complex64::from_polar(1.0, w * t)
}

/// `F̂₂(k,t) = E[ψ̂₀(k)*ψ̂_t(k)]/|Λ|`, phase-removed, at the requested mode
/// indices and microscopic times, which must have been recorded.  Errors
/// are batch-mean standard errors over realizations.
pub fn estimate_f2(ensemble: &Ensemble, modes: &[usize], times: &[f64], batch_size: usize) -> Result<CovarianceSeries> {
    let groups: Vec<Vec<usize>> = modes.iter().map(|&k| vec![k]).collect();
    estimate_f2_grouped(ensemble, &groups, times, batch_size)
}

/// As [`estimate_f2`], with each realization's estimate averaged over a
/// group of modes sharing the same `F̂₂`, such as a symmetry orbit.  The
/// series is labelled by the first mode of each group.
pub fn estimate_f2_grouped(ensemble: &Ensemble, groups: &[Vec<usize>], times: &[f64], batch_size: usize) -> Result<CovarianceSeries> {
    ensemble.validate()?;
    let n = ensemble.realizations.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two realizations".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InvalidInput("mode groups must not be empty".into()));
    }
    let cols: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| g.iter().map(|&k| position(&ensemble.modes, k)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let rows: Vec<usize> = times.iter().map(|&t| time_position(&ensemble.times, t)).collect::<Result<_>>()?;
    let (nk, nt) = (groups.len(), times.len());
    let vol = ensemble.model.volume() as f64;
    let phases: Vec<Vec<Vec<Complex64>>> = groups
        .iter()
        .map(|g| g.iter().map(|&k| times.iter().map(|&t| phase(ensemble, k, t) / (vol * g.len() as f64)).collect()).collect())
        .collect();
    let mut acc = BatchMeans::new(2 * nk * nt, batch_size);
    let mut sample = vec![0.0; 2 * nk * nt];
    for real in &ensemble.realizations {
        for (i, group) in cols.iter().enumerate() {
            for (r, &row) in rows.iter().enumerate() {
                let z: Complex64 =
                    group.iter().enumerate().map(|(m, &c)| real.initial[c].conj() * real.values[row][c] * phases[i][m][r]).sum();
                let at = 2 * (i * nt + r);
                sample[at] = z.re;
                sample[at + 1] = z.im;
            }
        }
        acc.push(&sample);
    }
    let lat = ensemble.model.lattice;
    let mut value = vec![vec![Complex64::new(0.0, 0.0); nt]; nk];
    let mut stderr_re = vec![vec![0.0; nt]; nk];
    let mut stderr_im = vec![vec![0.0; nt]; nk];
    for i in 0..nk {
        for r in 0..nt {
            let at = 2 * (i * nt + r);
            value[i][r] = Complex64::new(acc.mean(at), acc.mean(at + 1));
            stderr_re[i][r] = acc.stderr(at);
            stderr_im[i][r] = acc.stderr(at + 1);
        }
    }
    let lambda = ensemble.model.params.lambda;
    Ok(CovarianceSeries {
        lambda,
        d: lat.d(),
        k: groups.iter().map(|g| lat.momentum(g[0])).collect(),
        t: times.iter().map(|&t| kinetic_time(t, lambda)).collect(),
        micro_t: times.to_vec(),
        value,
        stderr_re,
        stderr_im,
        n_real: n,
        r0: ensemble.r0.value,
        r0_stderr: ensemble.r0.stderr,
        r0_analytic: ensemble.r0_analytic,
    })
}

/// Orbit of mode `k` under coordinate permutations and sign flips, which
/// leave the nearest-neighbour dispersion and the Gibbs measure invariant.
/// The orbit starts with `k` itself.
pub fn cubic_orbit(lattice: &LatticeConfig, k: usize) -> Vec<usize> {
    let d = lattice.d();
    let c = lattice.signed_coords(k);
    let mut perm: Vec<usize> = (0..d).collect();
    let mut out = vec![k];
    loop {
        for signs in 0..(1u32 << d) {
            let x: Vec<i64> = (0..d).map(|a| if signs >> a & 1 == 1 { -c[perm[a]] } else { c[perm[a]] }).collect();
            let idx = lattice.index(&x);
            if !out.contains(&idx) {
                out.push(idx);
            }
        }
        // Next permutation in lexicographic order.
        let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else { break };
        let j = (i + 1..d).rev().find(|&j| perm[j] > perm[i]).expect("a larger element exists");
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
    out
}

/// Series over every recorded mode and time of the ensemble.
pub fn estimate_f2_all(ensemble: &Ensemble, batch_size: usize) -> Result<CovarianceSeries> {
    estimate_f2(ensemble, &ensemble.modes.clone(), &ensemble.times.clone(), batch_size)
}

impl CovarianceSeries {
    /// Writes the fixed columns `k1..kd, t, re, im, stderr_re, stderr_im, n_real`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.d).map(|i| format!("k{i}")).collect();
        header.extend(["t", "re", "im", "stderr_re", "stderr_im", "n_real"].map(String::from));
        out.write_record(&header)?;
        for (i, k) in self.k.iter().enumerate() {
            for r in 0..self.t.len() {
                let mut row: Vec<String> = k.iter().map(|v| v.to_string()).collect();
                let v = self.value[i][r];
                row.extend([
                    self.t[r].to_string(),
                    format!("{:.12e}", v.re),
                    format!("{:.12e}", v.im),
                    format!("{:.6e}", self.stderr_re[i][r]),
                    format!("{:.6e}", self.stderr_im[i][r]),
                    self.n_real.to_string(),
                ]);
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Standard error of `|value|`, taken as the larger component error.
    pub fn stderr(&self, i: usize, r: usize) -> f64 {
        self.stderr_re[i][r].max(self.stderr_im[i][r])
    }
}

/// A finitely supported test function on `ℤ^d`: `(site, value)` pairs.
pub type TestFunction = [(Vec<i64>, Complex64)];

/// `Q` by its two algebraically equal routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValue {
    /// `(1/|Λ|)Σ_k ĝ(k)* f̂(k) e^{iω^λ t}F̂₂(k,t)`.
    pub spectral: Complex64,
    /// `E[⟨f,a₀⟩*⟨g,a_t⟩]` averaged over joint translations of `f` and `g`,
    /// with `a_t` the phase-removed field.
    pub direct: Complex64,
    /// Standard error of the direct route over realizations.
    pub stderr: f64,
}

fn check_support(f: &TestFunction, d: usize, l: usize) -> Result<()> {
    for (x, _) in f {
        if x.len() != d {
            return Err(Error::InvalidInput(format!("site {x:?} has the wrong dimension")));
        }
        if x.iter().any(|c| 2 * c.unsigned_abs() as usize >= l) {
            return Err(Error::InvalidInput(format!("support point {x:?} is not within L/2 of the origin; wrapping is ambiguous")));
        }
    }
    Ok(())
}

fn transform(f: &TestFunction, lattice: &LatticeConfig) -> Vec<Complex64> {
    (0..lattice.volume())
        .map(|k| {
            let p = lattice.momentum(k);
            f.iter()
                .map(|(x, v)| {
                    let dot: f64 = x.iter().zip(&p).map(|(a, b)| *a as f64 * b).sum();
                    v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * dot)
                })
                .sum()
        })
        .collect()
}

/// `Q[g,f](t)` at the recorded microscopic time `t`.  The ensemble must
/// record every mode.
pub fn compute_q(g: &TestFunction, f: &TestFunction, t: f64, ensemble: &Ensemble) -> Result<QValue> {
    ensemble.validate()?;
    let lat = ensemble.model.lattice;
    let vol = lat.volume();
    check_support(f, lat.d(), lat.l())?;
    check_support(g, lat.d(), lat.l())?;
    if ensemble.modes.len() != vol || ensemble.modes.iter().enumerate().any(|(i, &k)| i != k) {
        return Err(Error::InvalidInput("Q needs every mode recorded in natural order".into()));
    }
    let row = time_position(&ensemble.times, t)?;
    let n = ensemble.realizations.len();
    if n < 2 {
        return Err(Error::InvalidInput("need at least two realizations".into()));
    }
    let fh = transform(f, &lat);
    let gh = transform(g, &lat);
    let ph: Vec<Complex64> = (0..vol).map(|k| phase(ensemble, k, t)).collect();
    let fs: Vec<(usize, Complex64)> = f.iter().map(|(x, v)| (lat.index(x), v.conj())).collect();
    let gs: Vec<(usize, Complex64)> = g.iter().map(|(x, v)| (lat.index(x), v.conj())).collect();
    let shift = |site: usize, y: usize| -> usize {
        let a = lat.coords(site);
        let b = lat.coords(y);
        let s: Vec<i64> = a.iter().zip(&b).map(|(u, v)| (*u + *v) as i64).collect();
        lat.index(&s)
    };
    let shifted: Vec<(Vec<usize>, Vec<usize>)> = (0..vol)
        .map(|y| (fs.iter().map(|(s, _)| shift(*s, y)).collect(), gs.iter().map(|(s, _)| shift(*s, y)).collect()))
        .collect();
    let mut f2 = vec![Complex64::new(0.0, 0.0); vol];
    let mut direct = Vec::with_capacity(n);
    for real in &ensemble.realizations {
        let mut a0 = real.initial.clone();
        let mut at: Vec<Complex64> = real.values[row].iter().zip(&ph).map(|(v, p)| v * p).collect();
        for k in 0..vol {
            f2[k] += a0[k].conj() * at[k] / (vol as f64 * n as f64);
        }
        ensemble.model.fft().inverse(&mut a0);
        ensemble.model.fft().inverse(&mut at);
        let mut sum = Complex64::new(0.0, 0.0);
        for (fy, gy) in &shifted {
            let pf: Complex64 = fy.iter().zip(&fs).map(|(&s, (_, c))| c * a0[s]).sum();
            let pg: Complex64 = gy.iter().zip(&gs).map(|(&s, (_, c))| c * at[s]).sum();
            sum += pf.conj() * pg;
        }
        direct.push(sum / vol as f64);
    }
    let spectral: Complex64 = (0..vol).map(|k| gh[k].conj() * fh[k] * f2[k]).sum::<Complex64>() / vol as f64;
    let mean: Complex64 = direct.iter().sum::<Complex64>() / n as f64;
    let var = direct.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    Ok(QValue { spectral, direct: mean, stderr: (var / n as f64).sqrt() })
}
