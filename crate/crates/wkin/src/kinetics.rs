//! Kinetic prediction: the complex decay rate `Γ = Γ₁ + iΓ₂`, the
//! renormalized dispersion, the four-wave collision operator and the
//! spatially homogeneous kinetic equation.
//!
//! Every momentum integral with the constraint `k₁ + k₂ = k₃ + k₄` is a
//! convolution.  At a fixed time `t` it is evaluated for all `k₁` at once on
//! an `M^d` grid: the weighted propagators `A_f(x,t) = ∫dk e^{i2πk·x} e^{−itω(k)} f(k)`
//! are obtained by inverse FFT, multiplied pointwise, and transformed back.
//! The energy delta is then realized as a time integral, regularized either
//! by `e^{−εt}` on the half line or by a Gaussian of width `β` on the full
//! line, and both regularizations are extrapolated to zero.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{distance_to_singular, DispersionRelation};
use crate::error::{Error, Result};
use crate::gibbs::{GibbsParams, LatticeModel};
use crate::lattice::{LatticeConfig, NdFft};
use crate::numerics::extrapolate_to_zero;

/// Number of time chunks summed independently; fixed so that results do
/// not depend on the thread count.
const TIME_CHUNKS: usize = 8;

/// Quadrature parameters for the kinetic integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Grid points per axis.
    #[serde(rename = "M")]
    pub m: usize,
    /// Time horizon of the delta-function representation.
    pub t_max: f64,
    /// Time step of the quadrature.
    pub dt: f64,
    /// Strictly decreasing regulators for `e^{−εt}`.
    pub epsilon_ladder: Vec<f64>,
    /// Strictly decreasing Gaussian widths of the energy delta.
    pub beta_ladder: Vec<f64>,
    /// Relative tolerance of the extrapolation convergence test.
    pub tolerance: f64,
    /// Momenta closer than this to the singular manifold are flagged.
    pub singular_radius: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            m: 64,
            t_max: 200.0,
            dt: 0.1,
            epsilon_ladder: vec![0.2, 0.1, 0.05],
            beta_ladder: vec![0.2, 0.1, 0.05],
            tolerance: 0.02,
            singular_radius: 0.05,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 4 || self.m % 2 != 0 {
            return Err(Error::InvalidInput(format!("M must be even and at least 4, got {}", self.m)));
        }
        if !(self.dt > 0.0) || !(self.t_max >= 6.0 * self.dt) {
            return Err(Error::InvalidInput("need dt > 0 and t_max ≥ 6·dt".into()));
        }
        for (name, ladder) in [("epsilon", &self.epsilon_ladder), ("beta", &self.beta_ladder)] {
            if ladder.len() < 3 {
                return Err(Error::InvalidInput(format!("{name} ladder needs at least 3 entries")));
            }
            if ladder.iter().any(|v| !(*v > 0.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::InvalidInput(format!("{name} ladder must be positive and strictly decreasing")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Quadrature nodes `t_j = j·dt` with Gregory end corrections at `t = 0`.
    pub(crate) fn nodes(&self) -> Vec<(f64, f64)> {
        let n = (self.t_max / self.dt).round() as usize;
        const START: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        (0..=n)
            .map(|j| {
                let w = if j < 3 {
                    START[j]
                } else if j == n {
                    0.5
                } else {
                    1.0
                };
                (j as f64 * self.dt, w * self.dt)
            })
            .collect()
    }
}

/// Time damping applied to one accumulated series.
#[derive(Debug, Clone, Copy)]
enum Damping {
    Exp(f64),
    Gauss(f64),
}

impl Damping {
    fn at(self, t: f64) -> f64 {
        match self {
            Damping::Exp(e) => (-e * t).exp(),
            Damping::Gauss(b) => (-0.5 * b * b * t * t).exp(),
        }
    }

    /// Quadrature weight of the node `t` whose Gregory weight is `gregory`.
    /// The Gaussian-damped integrands are even in `t`, where the plain
    /// trapezoid rule is spectrally accurate and end corrections only add a
    /// smooth background in the energy variable.
    fn weight(self, t: f64, gregory: f64, config: &QuadratureConfig) -> f64 {
        match self {
            Damping::Exp(_) => gregory,
            Damping::Gauss(_) if t == 0.0 || (t - config.t_max).abs() < 0.5 * config.dt => 0.5 * config.dt,
            Damping::Gauss(_) => config.dt,
        }
    }
}

/// Per-momentum quality flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RateFlags {
    /// Within the configured radius of the singular manifold.
    pub near_singular: bool,
    /// The ε-extrapolation failed its convergence test.
    pub time_unconverged: bool,
    /// The β-extrapolation failed its convergence test.
    pub measure_unconverged: bool,
}

impl RateFlags {
    fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.near_singular {
            parts.push("near_singular");
        }
        if self.time_unconverged {
            parts.push("time_unconverged");
        }
        if self.measure_unconverged {
            parts.push("measure_unconverged");
        }
        if parts.is_empty() {
            "ok".into()
        } else {
            parts.join("|")
        }
    }
}

/// Quadrature metadata stored with a rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMetadata {
    #[serde(rename = "M")]
    pub m: usize,
    pub t_max: f64,
    pub dt: f64,
    pub epsilon_ladder: Vec<f64>,
    pub beta_ladder: Vec<f64>,
}

/// Decay rate on the full `M^d` momentum grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticRate {
    pub d: usize,
    /// Torus points in row-major grid order.
    pub k: Vec<Vec<f64>>,
    /// `Γ₁` from the positive delta-measure form.
    pub gamma1: Vec<f64>,
    /// `Re Γ` from the half-line time integral.
    pub gamma1_time: Vec<f64>,
    /// `Im Γ` from the half-line time integral.
    pub gamma2: Vec<f64>,
    pub err1: Vec<f64>,
    pub err1_time: Vec<f64>,
    pub err2: Vec<f64>,
    pub flags: Vec<RateFlags>,
    pub meta: RateMetadata,
}

impl KineticRate {
    fn lattice(&self) -> LatticeConfig {
        LatticeConfig::new(self.d, self.meta.m).expect("rate grid was validated on construction")
    }

    /// Grid index of a momentum, which must lie on the grid.
    pub fn index_of(&self, k: &[f64]) -> Result<usize> {
        if k.len() != self.d {
            return Err(Error::InvalidInput(format!("expected {}-component momentum", self.d)));
        }
        self.lattice()
            .momentum_index(k)
            .ok_or_else(|| Error::InvalidInput(format!("momentum {k:?} is not on the M = {} grid", self.meta.m)))
    }

    /// `Γ₁(k) + iΓ₂(k)` with `Γ₁` from the measure form.
    pub fn gamma_at(&self, k: &[f64]) -> Result<Complex64> {
        let i = self.index_of(k)?;
        Ok(Complex64::new(self.gamma1[i], self.gamma2[i]))
    }

    pub fn max_gamma1(&self) -> f64 {
        self.gamma1.iter().copied().fold(0.0, f64::max)
    }

    /// Writes the table as CSV with columns `k0..k{d−1}, gamma1, gamma2,
    /// err1, err2, gamma1_time, err1_time, flags`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.d).map(|i| format!("k{i}")).collect();
        header.extend(["gamma1", "gamma2", "err1", "err2", "gamma1_time", "err1_time", "flags"].map(String::from));
        out.write_record(&header)?;
        for i in 0..self.k.len() {
            let mut row: Vec<String> = self.k[i].iter().map(|v| format!("{v}")).collect();
            row.extend([
                format!("{:.10e}", self.gamma1[i]),
                format!("{:.10e}", self.gamma2[i]),
                format!("{:.3e}", self.err1[i]),
                format!("{:.3e}", self.err2[i]),
                format!("{:.10e}", self.gamma1_time[i]),
                format!("{:.3e}", self.err1_time[i]),
                self.flags[i].label(),
            ]);
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Restricts the table to the given rows, keeping metadata.
    pub fn select(&self, rows: &[usize]) -> KineticRate {
        let pick = |v: &Vec<f64>| rows.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        KineticRate {
            d: self.d,
            k: rows.iter().map(|&i| self.k[i].clone()).collect(),
            gamma1: pick(&self.gamma1),
            gamma1_time: pick(&self.gamma1_time),
            gamma2: pick(&self.gamma2),
            err1: pick(&self.err1),
            err1_time: pick(&self.err1_time),
            err2: pick(&self.err2),
            flags: rows.iter().map(|&i| self.flags[i]).collect(),
            meta: self.meta.clone(),
        }
    }
}

/// Wave-action density `h(k) ≥ 0` on the quadrature grid at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousState {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub h: Vec<f64>,
    pub t: f64,
}

impl HomogeneousState {
    pub fn new(d: usize, m: usize, h: Vec<f64>, t: f64) -> Result<Self> {
        let lat = LatticeConfig::new(d, m)?;
        if h.len() != lat.volume() {
            return Err(Error::InvalidInput(format!("state has {} values, grid needs {}", h.len(), lat.volume())));
        }
        if h.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("wave-action density must be nonnegative".into()));
        }
        Ok(Self { d, m, h, t })
    }

    /// `∫h dk`.
    pub fn mass(&self) -> f64 {
        self.h.iter().sum::<f64>() / self.h.len() as f64
    }

    /// `∫ω h dk` for `ω` tabulated on the same grid.
    pub fn energy(&self, omega: &[f64]) -> f64 {
        self.h.iter().zip(omega).map(|(h, w)| h * w).sum::<f64>() / self.h.len() as f64
    }
}

/// Result of one evaluation of the collision operator.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionValue {
    /// `𝒞(h)` extrapolated in `β²`.
    pub value: Vec<f64>,
    /// Magnitude of the loss part `4π∫δδ(h₁h₂h₃ + h₁h₂h₄)`.
    pub loss: Vec<f64>,
    /// Extrapolation error estimate.
    pub err: Vec<f64>,
}

/// Grid data and quadrature for the kinetic integrals.
#[derive(Debug, Clone)]
pub struct KineticKernel {
    lattice: LatticeConfig,
    omega: Vec<f64>,
    w: Vec<f64>,
    fft: NdFft,
    config: QuadratureConfig,
}

impl KineticKernel {
    /// Tabulates `ω` and `W = 1/(β(ω−μ))` on the `M^d` grid of `config`.
    pub fn new(dispersion: &DispersionRelation, params: GibbsParams, config: QuadratureConfig) -> Result<Self> {
        config.validate()?;
        if dispersion.is_constant() {
            return Err(Error::InvalidInput(
                "constant dispersion has no dispersive decay; the rate integral diverges".into(),
            ));
        }
        let lattice = LatticeConfig::new(dispersion.d, config.m)?;
        let model = LatticeModel::new(lattice, dispersion.clone(), params)?;
        Ok(Self {
            lattice,
            omega: model.omega().to_vec(),
            w: model.covariance().to_vec(),
            fft: model.fft().clone(),
            config,
        })
    }

    /// Replaces the covariance by an arbitrary positive spectral function.
    pub fn with_covariance(mut self, w: Vec<f64>) -> Result<Self> {
        if w.len() != self.lattice.volume() || w.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput("covariance must be positive on every grid point".into()));
        }
        self.w = w;
        Ok(self)
    }

    pub fn lattice(&self) -> LatticeConfig {
        self.lattice
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.config
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn covariance(&self) -> &[f64] {
        &self.w
    }

    pub(crate) fn fft(&self) -> &NdFft {
        &self.fft
    }

    fn metadata(&self) -> RateMetadata {
        RateMetadata {
            m: self.config.m,
            t_max: self.config.t_max,
            dt: self.config.dt,
            epsilon_ladder: self.config.epsilon_ladder.clone(),
            beta_ladder: self.config.beta_ladder.clone(),
        }
    }

    /// `A_f(x,t)` for `f` on the grid.
    fn weighted_propagator(&self, t: f64, f: Option<&[f64]>) -> Vec<Complex64> {
        let mut a: Vec<Complex64> = self
            .omega
            .iter()
            .enumerate()
            .map(|(i, &om)| Complex64::from_polar(f.map_or(1.0, |f| f[i]), -t * om))
            .collect();
        self.fft.inverse(&mut a);
        a
    }

    /// `∫dk₂dk₃dk₄ δ(k₁+k₂−k₃−k₄) e^{it(ω₂−ω₃−ω₄)} u₂v₃w₄` for all `k₁`
    /// from the site-space product `conj(A_u)·A_v·A_w`.
    fn contract(&self, mut product: Vec<Complex64>) -> Vec<Complex64> {
        self.fft.forward(&mut product);
        product
    }

    /// Inner momentum integral `I(k₁,t)` of the rate for every `k₁`.
    pub fn gamma_integrand(&self, t: f64) -> Vec<Complex64> {
        self.rate_series(t, true, false).remove(0)
    }

    /// Series of `I(k₁,t)` and/or `G(k₁,t) = ∫δ e^{it(ω₂−ω₃−ω₄)} W₂W₃W₄`.
    fn rate_series(&self, t: f64, want_i: bool, want_g: bool) -> Vec<Vec<Complex64>> {
        let a1 = self.weighted_propagator(t, None);
        let aw = self.weighted_propagator(t, Some(&self.w));
        let mut out = Vec::new();
        if want_i {
            let b: Vec<Complex64> = a1
                .iter()
                .zip(&aw)
                .map(|(p, q)| p.conj() * q * q - 2.0 * q.norm_sqr() * p)
                .collect();
            out.push(self.contract(b));
        }
        if want_g {
            let b: Vec<Complex64> = aw.iter().map(|q| q.conj() * q * q).collect();
            out.push(self.contract(b));
        }
        out
    }

    /// Accumulates `Σ_j w_j·damp(t_j)·e^{it_jω(k₁)}·S_s(k₁,t_j)` for each
    /// requested `(series, damping)` pair.  Time chunks are summed in a fixed
    /// order.  Also returns `max_k |S_s(k, t_max)|` for each series.
    fn accumulate<K>(&self, outputs: &[(usize, Damping)], n_series: usize, kernel: K) -> (Vec<Vec<Complex64>>, Vec<f64>)
    where
        K: Fn(f64) -> Vec<Vec<Complex64>> + Sync,
    {
        let nodes = self.config.nodes();
        let size = self.lattice.volume();
        let chunk = nodes.len().div_ceil(TIME_CHUNKS);
        let zero = Complex64::new(0.0, 0.0);
        let partials: Vec<(Vec<Vec<Complex64>>, Option<Vec<f64>>)> = nodes
            .par_chunks(chunk)
            .map(|part| {
                let mut acc = vec![vec![zero; size]; outputs.len()];
                let mut last = None;
                for &(t, wt) in part {
                    let series = kernel(t);
                    debug_assert_eq!(series.len(), n_series);
                    let factors: Vec<f64> = outputs.iter().map(|(_, d)| d.weight(t, wt, &self.config) * d.at(t)).collect();
                    for k in 0..size {
                        let phase = Complex64::from_polar(1.0, t * self.omega[k]);
                        for (o, &(s, _)) in outputs.iter().enumerate() {
                            acc[o][k] += phase * series[s][k] * factors[o];
                        }
                    }
                    if (t - self.config.t_max).abs() < 0.5 * self.config.dt {
                        last = Some(series.iter().map(|s| s.iter().map(|v| v.norm()).fold(0.0, f64::max)).collect());
                    }
                }
                (acc, last)
            })
            .collect();
        let mut total = vec![vec![zero; size]; outputs.len()];
        let mut tail = vec![0.0; n_series];
        for (acc, last) in partials {
            for (t, a) in total.iter_mut().zip(acc) {
                t.iter_mut().zip(a).for_each(|(x, y)| *x += y);
            }
            if let Some(l) = last {
                tail = l;
            }
        }
        (total, tail)
    }

    /// `Γ_ε(k)` on the full grid for every `ε` of the ladder, before the
    /// extrapolation `ε → 0`.
    pub fn gamma_regularized(&self) -> Vec<Vec<Complex64>> {
        let outputs: Vec<(usize, Damping)> =
            self.config.epsilon_ladder.iter().map(|&e| (0, Damping::Exp(e))).collect();
        let (acc, _) = self.accumulate(&outputs, 1, |t| self.rate_series(t, true, false));
        acc.into_iter().map(|row| row.into_iter().map(|v| v * -2.0).collect()).collect()
    }

    /// Both realizations of the rate on the full grid.
    pub fn rate_table(&self) -> Result<KineticRate> {
        self.rates(true, true)
    }

    fn rates(&self, want_time: bool, want_measure: bool) -> Result<KineticRate> {
        let cfg = &self.config;
        let mut outputs = Vec::new();
        let mut n_series = 0;
        let (s_i, s_g) = (0, usize::from(want_time));
        if want_time {
            outputs.extend(cfg.epsilon_ladder.iter().map(|&e| (s_i, Damping::Exp(e))));
            n_series += 1;
        }
        if want_measure {
            outputs.extend(cfg.beta_ladder.iter().map(|&b| (s_g, Damping::Gauss(b))));
            n_series += 1;
        }
        let (acc, tail) = self.accumulate(&outputs, n_series, |t| self.rate_series(t, want_time, want_measure));
        let size = self.lattice.volume();
        let ne = if want_time { cfg.epsilon_ladder.len() } else { 0 };
        let eps_min = *cfg.epsilon_ladder.last().unwrap();
        let tail_time = if want_time { 2.0 * tail[s_i] * (-eps_min * cfg.t_max).exp() / eps_min } else { 0.0 };

        let mut gamma1_time = vec![f64::NAN; size];
        let mut gamma2 = vec![f64::NAN; size];
        let mut err1_time = vec![f64::NAN; size];
        let mut err2 = vec![f64::NAN; size];
        let mut gamma1 = vec![f64::NAN; size];
        let mut err1 = vec![f64::NAN; size];
        let mut flags = vec![RateFlags::default(); size];
        for k in 0..size {
            if want_time {
                let ys: Vec<Complex64> = (0..ne).map(|j| acc[j][k] * -2.0).collect();
                let (v, e) = extrapolate_to_zero(&cfg.epsilon_ladder, &ys);
                gamma1_time[k] = v.re;
                gamma2[k] = v.im;
                err1_time[k] = e.re.abs() + tail_time;
                err2[k] = e.im.abs() + tail_time;
            }
            if want_measure {
                let xs: Vec<f64> = cfg.beta_ladder.iter().map(|b| b * b).collect();
                let ys: Vec<f64> = (0..cfg.beta_ladder.len()).map(|j| 2.0 * acc[ne + j][k].re / self.w[k]).collect();
                let (v, e) = extrapolate_to_zero(&xs, &ys);
                gamma1[k] = v;
                err1[k] = e.abs();
            }
            flags[k].near_singular = distance_to_singular(&self.lattice.momentum(k)) < cfg.singular_radius;
        }
        let scale = |v: &[f64]| v.iter().filter(|x| x.is_finite()).map(|x| x.abs()).fold(0.0, f64::max);
        let floor1 = 1e-3 * scale(&gamma1).max(scale(&gamma1_time));
        let floor2 = 1e-3 * scale(&gamma2);
        for k in 0..size {
            if want_time {
                let rel1 = err1_time[k] / gamma1_time[k].abs().max(floor1);
                let rel2 = err2[k] / gamma2[k].abs().max(floor2.max(floor1));
                flags[k].time_unconverged = rel1 > cfg.tolerance || rel2 > cfg.tolerance;
            }
            if want_measure {
                flags[k].measure_unconverged = err1[k] / gamma1[k].abs().max(floor1) > cfg.tolerance;
            }
        }
        Ok(KineticRate {
            d: self.lattice.d(),
            k: (0..size).map(|i| self.lattice.momentum(i)).collect(),
            gamma1,
            gamma1_time,
            gamma2,
            err1,
            err1_time,
            err2,
            flags,
            meta: self.metadata(),
        })
    }

    /// `Γ(k₁)` from the half-line time integral with `e^{−εt}` regularization,
    /// extrapolated `ε → 0`.  Returns the value and its error estimate.
    pub fn gamma_time_integral(&self, k1: &[f64]) -> Result<(Complex64, Complex64)> {
        let table = self.rates(true, false)?;
        let i = table.index_of(k1)?;
        if table.flags[i].time_unconverged {
            return Err(Error::NonConvergence(format!(
                "ε-extrapolation of Γ at {k1:?} changed by more than {}",
                self.config.tolerance
            )));
        }
        Ok((Complex64::new(table.gamma1_time[i], table.gamma2[i]), Complex64::new(table.err1_time[i], table.err2[i])))
    }

    /// `Γ₁(k₁)` from the Gaussian-regularized delta measure, extrapolated
    /// `β → 0`.  Returns the value and its error estimate.
    pub fn gamma1_delta_measure(&self, k1: &[f64]) -> Result<(f64, f64)> {
        let table = self.rates(false, true)?;
        let i = table.index_of(k1)?;
        if table.flags[i].measure_unconverged {
            return Err(Error::NonConvergence(format!(
                "β-extrapolation of Γ₁ at {k1:?} changed by more than {}",
                self.config.tolerance
            )));
        }
        Ok((table.gamma1[i], table.err1[i]))
    }

    /// Collision operator `𝒞(h)` on the full grid with the Gaussian energy
    /// delta, extrapolated in `β²`.
    pub fn collision_operator(&self, h: &[f64]) -> Result<CollisionValue> {
        let size = self.lattice.volume();
        if h.len() != size {
            return Err(Error::InvalidInput(format!("h has {} values, grid needs {size}", h.len())));
        }
        if h.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("h must be nonnegative".into()));
        }
        let cfg = &self.config;
        let mut outputs = Vec::new();
        for &b in &cfg.beta_ladder {
            outputs.push((0, Damping::Gauss(b)));
            outputs.push((1, Damping::Gauss(b)));
        }
        let kernel = |t: f64| {
            let a1 = self.weighted_propagator(t, None);
            let ah = self.weighted_propagator(t, Some(h));
            let gain = self.contract(ah.iter().map(|q| q.conj() * q * q).collect());
            let mixed = self.contract(a1.iter().zip(&ah).map(|(p, q)| p.conj() * q * q).collect());
            let loss = self.contract(a1.iter().zip(&ah).map(|(p, q)| q.norm_sqr() * p).collect());
            let full = (0..size).map(|k| gain[k] + h[k] * mixed[k] - 2.0 * h[k] * loss[k]).collect();
            let loss = (0..size).map(|k| loss[k] * (2.0 * h[k])).collect();
            vec![full, loss]
        };
        let (acc, _) = self.accumulate(&outputs, 2, kernel);
        let xs: Vec<f64> = cfg.beta_ladder.iter().map(|b| b * b).collect();
        let nb = cfg.beta_ladder.len();
        let mut value = vec![0.0; size];
        let mut loss = vec![0.0; size];
        let mut err = vec![0.0; size];
        for k in 0..size {
            let ys: Vec<f64> = (0..nb).map(|j| 4.0 * acc[2 * j][k].re).collect();
            let ls: Vec<f64> = (0..nb).map(|j| 4.0 * acc[2 * j + 1][k].re).collect();
            let (v, e) = extrapolate_to_zero(&xs, &ys);
            let (l, _) = extrapolate_to_zero(&xs, &ls);
            value[k] = v;
            loss[k] = l.abs();
            err[k] = e.abs();
        }
        Ok(CollisionValue { value, loss, err })
    }

    /// Integrates `∂_t h = 𝒞(h)` from `h0` to `t_end` with classical RK4.
    /// A step that produces a negative density is rejected and halved.
    pub fn solve_kinetic(&self, h0: &HomogeneousState, t_end: f64, dt: f64) -> Result<HomogeneousState> {
        if h0.d != self.lattice.d() || h0.m != self.config.m {
            return Err(Error::InvalidInput("initial state grid does not match the quadrature grid".into()));
        }
        if !(dt > 0.0) || !(t_end >= h0.t) {
            return Err(Error::InvalidInput("need dt > 0 and t_end ≥ initial time".into()));
        }
        let min_step = 1e-8 * (t_end - h0.t).max(dt);
        let mut state = h0.clone();
        let mut step = dt;
        while state.t < t_end - 1e-12 * t_end.abs().max(1.0) {
            let hstep = step.min(t_end - state.t);
            let next = self.rk4_step(&state.h, hstep)?;
            if next.iter().any(|v| *v < 0.0) {
                step *= 0.5;
                if step < min_step {
                    return Err(Error::NonConvergence(format!("kinetic step size underflow at t = {}", state.t)));
                }
                continue;
            }
            state.h = next;
            state.t += hstep;
        }
        Ok(state)
    }

    fn rk4_step(&self, h: &[f64], dt: f64) -> Result<Vec<f64>> {
        let rhs = |x: &[f64]| -> Result<Vec<f64>> {
            // Intermediate stages may dip slightly below zero; the operator
            // is evaluated on the clipped density.
            let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            Ok(self.collision_operator(&clipped)?.value)
        };
        let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
        let k1 = rhs(h)?;
        let k2 = rhs(&axpy(h, 0.5 * dt, &k1))?;
        let k3 = rhs(&axpy(h, 0.5 * dt, &k2))?;
        let k4 = rhs(&axpy(h, dt, &k3))?;
        Ok((0..h.len()).map(|i| h[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }
}

/// Renormalized dispersion `ω(k) + λR₀ + λ²Γ₂(k)`.
pub fn omega_ren(dispersion: &DispersionRelation, k: &[f64], lambda: f64, r0: f64, gamma2: f64) -> Result<f64> {
    Ok(dispersion.omega(k)? + lambda * r0 + lambda * lambda * gamma2)
}

/// Predicted covariance `W e^{−Γ₁|t| − itΓ₂}`.
pub fn predicted_covariance(w: f64, gamma: Complex64, t: f64) -> Complex64 {
    Complex64::from_polar(w * (-gamma.re * t.abs()).exp(), -t * gamma.im)
}

/// Gaussian energy delta of width `β` realized by the same time quadrature
/// as the kernel: `(1/π)Σ_j w_j e^{−β²t_j²/2} cos(t_jΩ)` with trapezoid
/// weights `w_j`.
pub fn discrete_gaussian_delta(config: &QuadratureConfig, beta: f64, omega_sum: f64) -> f64 {
    config
        .nodes()
        .iter()
        .map(|&(t, w)| {
            let d = Damping::Gauss(beta);
            d.weight(t, w, config) * d.at(t) * (t * omega_sum).cos()
        })
        .sum::<f64>()
        / PI
}
