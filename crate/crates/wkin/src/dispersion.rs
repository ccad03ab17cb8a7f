//! Dispersion relation, free propagator, K-function, singular manifold and
//! smooth momentum cutoffs, with numerical checks of the dispersive decay and
//! interference bounds for nearest-neighbour hopping.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeConfig, NdFft};
use crate::numerics::{fit_line, propagator_1d, wrapped};

/// Exponent of the cutoff width `λ^b`.
pub const CUTOFF_EXPONENT: f64 = 0.75;

/// Default tubular radius around the singular manifold for nearest-neighbour hopping.
pub const DEFAULT_EPSILON0: f64 = 0.1;

/// Which family the dispersion relation belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DispersionKind {
    /// `ω(k) = c − Σ_ν cos(2πk^ν)`.
    NearestNeighbor,
    /// `ω(k) = c + T(k)` for a table `T` given on an `m^d` grid.
    Tabulated { m: usize, values: Vec<f64>, interpolate: bool },
}

/// Dispersion relation on the `d`-torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRelation {
    pub d: usize,
    pub c: f64,
    #[serde(flatten)]
    pub kind: DispersionKind,
}

impl DispersionRelation {
    pub fn nearest_neighbor(d: usize, c: f64) -> Self {
        Self { d, c, kind: DispersionKind::NearestNeighbor }
    }

    /// Tabulated relation; `values` are row-major on the `m^d` grid `j/m`.
    pub fn tabulated(d: usize, c: f64, m: usize, values: Vec<f64>, interpolate: bool) -> Result<Self> {
        let size = m.checked_pow(d as u32).unwrap_or(usize::MAX);
        if values.len() != size {
            return Err(Error::InvalidInput(format!("table has {} values, expected {size}", values.len())));
        }
        let lat = LatticeConfig::new(d, m)?;
        for i in 0..size {
            let j = lat.neg_index(i);
            if (values[i] - values[j]).abs() > 1e-12 * values[i].abs().max(1.0) {
                return Err(Error::InvalidInput("tabulated dispersion must be even".into()));
            }
        }
        Ok(Self { d, c, kind: DispersionKind::Tabulated { m, values, interpolate } })
    }

    pub fn is_nearest_neighbor(&self) -> bool {
        matches!(self.kind, DispersionKind::NearestNeighbor)
    }

    /// Evaluates `ω(k)`; tabulated relations reject off-grid points unless
    /// interpolation is enabled.
    pub fn omega(&self, k: &[f64]) -> Result<f64> {
        if k.len() != self.d {
            return Err(Error::InvalidInput(format!("expected {}-component momentum", self.d)));
        }
        match &self.kind {
            DispersionKind::NearestNeighbor => Ok(omega_nn(self.c, k)),
            DispersionKind::Tabulated { m, values, interpolate } => {
                let m = *m;
                let mut idx = 0usize;
                let mut on_grid = true;
                for &kv in k {
                    let s = kv.rem_euclid(1.0) * m as f64;
                    let r = s.round();
                    if (s - r).abs() > 1e-9 {
                        on_grid = false;
                    }
                    idx = idx * m + (r as usize % m);
                }
                if on_grid {
                    return Ok(self.c + values[idx]);
                }
                if !interpolate {
                    return Err(Error::InvalidInput("momentum lies off the tabulation grid".into()));
                }
                Ok(self.c + interpolate_periodic(self.d, m, values, k))
            }
        }
    }

    /// Values of `ω` on the `m^d` grid in row-major order.
    pub fn grid(&self, m: usize) -> Result<Vec<f64>> {
        let lat = LatticeConfig::new(self.d, m)?;
        (0..lat.volume()).map(|i| self.omega(&lat.momentum(i))).collect()
    }

    /// `sup_k |ω(k)|`.
    pub fn sup_norm(&self) -> f64 {
        match &self.kind {
            DispersionKind::NearestNeighbor => (self.c - self.d as f64).abs().max((self.c + self.d as f64).abs()),
            DispersionKind::Tabulated { values, .. } => {
                values.iter().map(|v| (self.c + v).abs()).fold(0.0, f64::max)
            }
        }
    }

    /// `inf_k ω(k)`.
    pub fn infimum(&self) -> f64 {
        match &self.kind {
            DispersionKind::NearestNeighbor => self.c - self.d as f64,
            DispersionKind::Tabulated { values, .. } => self.c + values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// True when `ω` takes a single value.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            DispersionKind::NearestNeighbor => false,
            DispersionKind::Tabulated { values, .. } => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo <= 1e-14 * hi.abs().max(1.0)
            }
        }
    }

    /// Free propagator `p_t(x)` at one lattice vector.
    pub fn free_propagator(&self, t: f64, x: &[i64], m: usize) -> Result<Complex64> {
        check_grid(m)?;
        if x.iter().any(|&v| v.unsigned_abs() as usize >= m / 2) {
            return Err(Error::InvalidInput(format!("|x|∞ must stay below M/2 = {}", m / 2)));
        }
        match &self.kind {
            DispersionKind::NearestNeighbor => {
                let q = propagator_1d(t, m);
                let mut v = Complex64::from_polar(1.0, -t * self.c);
                for &xv in x {
                    v *= wrapped(&q, xv);
                }
                Ok(v)
            }
            DispersionKind::Tabulated { .. } => {
                let block = self.propagator_block(t, m)?;
                let lat = LatticeConfig::new(self.d, m)?;
                Ok(block[lat.index(x)])
            }
        }
    }

    /// Free propagator on the whole `M^d` block, indexed row-major with
    /// negative coordinates wrapped.
    pub fn propagator_block(&self, t: f64, m: usize) -> Result<Vec<Complex64>> {
        self.k_block(t, 0.0, 0.0, &vec![0.0; self.d], &vec![0.0; self.d], m)
    }

    /// The K-function `∫dk e^{i2πx·k} e^{−i(t₀ω(k)+t₁ω(k+u₁)+t₂ω(k+u₂))}`.
    #[allow(clippy::too_many_arguments)]
    pub fn k_function(&self, x: &[i64], t0: f64, t1: f64, t2: f64, u1: &[f64], u2: &[f64], m: usize) -> Result<Complex64> {
        check_grid(m)?;
        if x.iter().any(|&v| v.unsigned_abs() as usize >= m / 2) {
            return Err(Error::InvalidInput(format!("|x|∞ must stay below M/2 = {}", m / 2)));
        }
        match &self.kind {
            DispersionKind::NearestNeighbor => {
                let mut v = Complex64::from_polar(1.0, -(t0 + t1 + t2) * self.c);
                for nu in 0..self.d {
                    let (r, theta) = k_axis_amplitude(t0, t1, t2, u1[nu], u2[nu]);
                    let q = propagator_1d(r, m);
                    v *= Complex64::from_polar(1.0, -(x[nu] as f64) * theta) * wrapped(&q, x[nu]);
                }
                Ok(v)
            }
            DispersionKind::Tabulated { .. } => {
                let block = self.k_block(t0, t1, t2, u1, u2, m)?;
                let lat = LatticeConfig::new(self.d, m)?;
                Ok(block[lat.index(x)])
            }
        }
    }

    /// `‖K(·;t₀,t₁,t₂,u₁,u₂)‖₃` over `ℤ^d`, using the per-axis reduction for
    /// nearest-neighbour hopping.
    pub fn k_norm3(&self, t0: f64, t1: f64, t2: f64, u1: &[f64], u2: &[f64]) -> Result<f64> {
        if !self.is_nearest_neighbor() {
            return Err(Error::InvalidInput("ℓ3 norm reduction requires nearest-neighbour hopping".into()));
        }
        let mut s = 1.0;
        for nu in 0..self.d {
            let (r, _) = k_axis_amplitude(t0, t1, t2, u1[nu], u2[nu]);
            s *= norm3_cubed_1d(r);
        }
        Ok(s.cbrt())
    }

    #[allow(clippy::too_many_arguments)]
    fn k_block(&self, t0: f64, t1: f64, t2: f64, u1: &[f64], u2: &[f64], m: usize) -> Result<Vec<Complex64>> {
        check_grid(m)?;
        let lat = LatticeConfig::new(self.d, m)?;
        match &self.kind {
            DispersionKind::NearestNeighbor => {
                let tables: Vec<(Vec<Complex64>, f64)> = (0..self.d)
                    .map(|nu| {
                        let (r, theta) = k_axis_amplitude(t0, t1, t2, u1[nu], u2[nu]);
                        (propagator_1d(r, m), theta)
                    })
                    .collect();
                let global = Complex64::from_polar(1.0, -(t0 + t1 + t2) * self.c);
                Ok((0..lat.volume())
                    .map(|i| {
                        let x = lat.signed_coords(i);
                        let mut v = global;
                        for (nu, (q, theta)) in tables.iter().enumerate() {
                            v *= Complex64::from_polar(1.0, -(x[nu] as f64) * theta) * wrapped(q, x[nu]);
                        }
                        v
                    })
                    .collect())
            }
            DispersionKind::Tabulated { .. } => {
                let mut buf = Vec::with_capacity(lat.volume());
                for i in 0..lat.volume() {
                    let k = lat.momentum(i);
                    let k1: Vec<f64> = k.iter().zip(u1).map(|(a, b)| a + b).collect();
                    let k2: Vec<f64> = k.iter().zip(u2).map(|(a, b)| a + b).collect();
                    let ph = t0 * self.omega(&k)? + t1 * self.omega(&k1)? + t2 * self.omega(&k2)?;
                    buf.push(Complex64::from_polar(1.0, -ph));
                }
                NdFft::new(lat).inverse(&mut buf);
                Ok(buf)
            }
        }
    }

    /// `‖p_t‖₃³ = Σ_x |p_t(x)|³` over `ℤ^d`.
    pub fn propagator_norm3_cubed(&self, t: f64, m: usize) -> Result<f64> {
        match &self.kind {
            DispersionKind::NearestNeighbor => Ok(norm3_cubed_1d(t).powi(self.d as i32)),
            DispersionKind::Tabulated { .. } => {
                Ok(self.propagator_block(t, m)?.iter().map(|v| v.norm().powi(3)).sum())
            }
        }
    }

    /// Fits the decay exponent of `‖p_t‖₃³` on a log–log scale using the
    /// samples with `t ≥ 5`.
    pub fn verify_dr2(&self, t_grid: &[f64], m: usize) -> Result<DecayFitReport> {
        if !self.is_nearest_neighbor() || self.d < 3 {
            return Err(Error::InvalidInput("decay check expects nearest-neighbour hopping with d ≥ 3".into()));
        }
        let samples: Vec<DecaySample> = t_grid
            .iter()
            .map(|&t| Ok(DecaySample { t, value: self.propagator_norm3_cubed(t, m)? }))
            .collect::<Result<_>>()?;
        let fit_pts: Vec<&DecaySample> = samples.iter().filter(|s| s.t >= 5.0).collect();
        if fit_pts.len() < 4 {
            return Err(Error::InvalidInput("decay fit needs at least 4 samples with t ≥ 5".into()));
        }
        let x: Vec<f64> = fit_pts.iter().map(|s| japanese(s.t).ln()).collect();
        let y: Vec<f64> = fit_pts.iter().map(|s| s.value.ln()).collect();
        let fit = fit_line(&x, &y, None).ok_or_else(|| Error::NonConvergence("degenerate decay fit".into()))?;
        let exponent = -fit.slope;
        let constant = fit_pts.iter().map(|s| s.value * japanese(s.t).powf(exponent)).fold(0.0, f64::max);
        let t_lo = fit_pts.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
        let t_hi = fit_pts.iter().map(|s| s.t).fold(f64::NEG_INFINITY, f64::max);
        Ok(DecayFitReport { d: self.d, exponent, exponent_err: fit.slope_err, constant, t_range: (t_lo, t_hi), m, samples })
    }

    /// `|∫dk e^{−it(ω(k)+σω(k−k₀))}|` for nearest-neighbour hopping.
    pub fn interference_integral(&self, t: f64, k0: &[f64], sigma: i8) -> f64 {
        let s = sigma as f64;
        (0..self.d)
            .map(|nu| {
                let z = Complex64::new(1.0, 0.0) + s * Complex64::from_polar(1.0, -2.0 * PI * k0[nu]);
                crate::numerics::bessel_j(0, t * z.norm()).abs()
            })
            .product()
    }

    /// Evaluates the interference integral on the given grid of times and
    /// momenta and fits the smallest constant `C` with
    /// `|I| ≤ C⟨t⟩^{−1}/d(k₀, M^sing)`.
    pub fn verify_dr3(&self, t_grid: &[f64], k0_samples: &[Vec<f64>], sigma: i8) -> Result<InterferenceReport> {
        if !self.is_nearest_neighbor() {
            return Err(Error::InvalidInput("interference check expects nearest-neighbour hopping".into()));
        }
        if sigma != 1 && sigma != -1 {
            return Err(Error::InvalidInput("σ must be ±1".into()));
        }
        let mut samples = Vec::new();
        for k0 in k0_samples {
            let dist = distance_to_singular(k0);
            for &t in t_grid {
                let value = self.interference_integral(t, k0, sigma);
                let skipped = dist <= 1e-14;
                let scaled = if skipped { None } else { Some(value * japanese(t) * dist) };
                samples.push(InterferenceSample { t, k0: k0.clone(), value, distance: dist, scaled, skipped });
            }
        }
        let constant = samples.iter().filter_map(|s| s.scaled).fold(0.0, f64::max);
        Ok(InterferenceReport { d: self.d, sigma, constant, samples })
    }

    /// Samples the first crossing bound: the ratio of
    /// `∫dt ‖p_t‖₃² ∫ds e^{−β|s|} ‖K(t,σ₁s,σ₂s,u₁,u₂)‖₃` to
    /// `β^{γ−1} Π_ν |sin 2π(u₂−u₁)^ν|^{−1/7}` with `γ = 4/7`.
    pub fn dr4_crossing_ratio(&self, u1: &[f64], u2: &[f64], sigma: (i8, i8), beta: f64, t_max: f64, h: f64) -> Result<f64> {
        let n = (t_max / h).ceil() as usize;
        let mut lhs = 0.0;
        for i in 0..=n {
            let t = i as f64 * h;
            let wt = if i == 0 || i == n { 0.5 } else { 1.0 };
            let pt = self.propagator_norm3_cubed(t, 16)?.powf(2.0 / 3.0);
            let mut inner = 0.0;
            for j in 0..=n {
                let s = j as f64 * h;
                let ws = if j == 0 || j == n { 0.5 } else { 1.0 };
                let plus = self.k_norm3(t, sigma.0 as f64 * s, sigma.1 as f64 * s, u1, u2)?;
                let minus = if j == 0 { 0.0 } else { self.k_norm3(t, -(sigma.0 as f64) * s, -(sigma.1 as f64) * s, u1, u2)? };
                inner += ws * (-beta * s).exp() * (plus + minus);
            }
            // ‖K‖₃ is invariant under a joint sign flip, so negative t doubles.
            lhs += (if i == 0 { 1.0 } else { 2.0 }) * wt * pt * inner * h;
        }
        lhs *= h;
        let du: Vec<f64> = u2.iter().zip(u1).map(|(a, b)| a - b).collect();
        Ok(lhs / (beta.powf(4.0 / 7.0 - 1.0) * crossing_weight(&du)))
    }

    /// Crossing ratios on sampled `(u₁, u₂, β)` and the empirical constant
    /// `C`, the largest sampled ratio.  `C` only bounds the samples taken; it
    /// carries no uniformity guarantee.
    pub fn dr4_crossing_report(&self, samples: &[(Vec<f64>, Vec<f64>, f64)], sigma: (i8, i8), t_max: f64, h: f64) -> Result<CrossingReport> {
        if samples.is_empty() || !(h > 0.0 && t_max >= h) {
            return Err(Error::InvalidInput("need samples, h > 0 and t_max ≥ h".into()));
        }
        let ratios = samples
            .iter()
            .map(|(u1, u2, beta)| self.dr4_crossing_ratio(u1, u2, sigma, *beta, t_max, h))
            .collect::<Result<Vec<f64>>>()?;
        let constant = ratios.iter().copied().fold(0.0, f64::max);
        Ok(CrossingReport { d: self.d, sigma, constant, ratios })
    }
}

fn omega_nn(c: f64, k: &[f64]) -> f64 {
    c - k.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>()
}

fn check_grid(m: usize) -> Result<()> {
    if m < 16 || m % 2 != 0 {
        return Err(Error::InvalidInput(format!("grid size must be even and at least 16, got {m}")));
    }
    Ok(())
}

fn interpolate_periodic(d: usize, m: usize, values: &[f64], k: &[f64]) -> f64 {
    let mut base = vec![0usize; d];
    let mut frac = vec![0.0; d];
    for a in 0..d {
        let s = k[a].rem_euclid(1.0) * m as f64;
        let f = s.floor();
        base[a] = f as usize % m;
        frac[a] = s - f;
    }
    let mut total = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = 0usize;
        for a in 0..d {
            let bit = (corner >> (d - 1 - a)) & 1;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            idx = idx * m + (base[a] + bit) % m;
        }
        total += w * values[idx];
    }
    total
}

/// Per-axis amplitude `R` and phase `θ` of `t₀ + t₁e^{iq₁} + t₂e^{iq₂}`.
fn k_axis_amplitude(t0: f64, t1: f64, t2: f64, u1: f64, u2: f64) -> (f64, f64) {
    let z = Complex64::new(t0, 0.0)
        + t1 * Complex64::from_polar(1.0, 2.0 * PI * u1)
        + t2 * Complex64::from_polar(1.0, 2.0 * PI * u2);
    (z.norm(), z.arg())
}

/// `Σ_{x∈ℤ} |q_R(x)|³` for the one-dimensional propagator.
fn norm3_cubed_1d(r: f64) -> f64 {
    propagator_1d(r, 16).iter().map(|v| v.norm().powi(3)).sum()
}

/// `⟨t⟩ = (1+t²)^{1/2}`.
pub fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// Torus distance from a real number to the set `{0, 1/2}`.
fn dist_to_half_lattice(x: f64) -> f64 {
    let r = x.rem_euclid(0.5);
    r.min(0.5 - r)
}

/// Torus distance from a real number to a given point.
fn torus_dist(x: f64, a: f64) -> f64 {
    let r = (x - a).rem_euclid(1.0);
    r.min(1.0 - r)
}

/// Distance of `k` from the set where all but one component lie in `{0, 1/2}`.
pub fn distance_to_singular(k: &[f64]) -> f64 {
    let deltas: Vec<f64> = k.iter().map(|&v| dist_to_half_lattice(v)).collect();
    let sum: f64 = deltas.iter().map(|v| v * v).sum();
    let max = deltas.iter().map(|v| v * v).fold(0.0, f64::max);
    (sum - max).max(0.0).sqrt()
}

/// The singular lines `L_{ν,a}`: component `ν` free, the others pinned at `a ∈ {0,1/2}^{d−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularLine {
    pub free_axis: usize,
    pub anchor: Vec<f64>,
}

impl SingularLine {
    pub fn distance(&self, k: &[f64]) -> f64 {
        k.iter()
            .enumerate()
            .filter(|(nu, _)| *nu != self.free_axis)
            .map(|(nu, &v)| torus_dist(v, self.anchor[nu]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// All `d·2^{d−1}` singular lines.
pub fn singular_lines(d: usize) -> Vec<SingularLine> {
    let mut out = Vec::with_capacity(d << (d - 1));
    for nu in 0..d {
        for bits in 0..(1usize << (d - 1)) {
            let mut anchor = vec![0.0; d];
            let mut b = 0;
            for (mu, a) in anchor.iter_mut().enumerate() {
                if mu == nu {
                    continue;
                }
                if (bits >> b) & 1 == 1 {
                    *a = 0.5;
                }
                b += 1;
            }
            out.push(SingularLine { free_axis: nu, anchor });
        }
    }
    out
}

/// Smooth even step: `1` on `|x| ≤ 1/2`, `0` on `|x| ≥ 1`, monotone in between.
pub fn step_profile(x: f64) -> f64 {
    fn h(s: f64) -> f64 {
        if s > 0.0 {
            (-1.0 / s).exp()
        } else {
            0.0
        }
    }
    let a = x.abs();
    let up = h(2.0 - 2.0 * a);
    let down = h(2.0 * a - 1.0);
    up / (up + down)
}

/// Smooth cutoffs around the singular manifold at coupling `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFamily {
    lambda: f64,
    width: f64,
    lines: Vec<SingularLine>,
}

impl CutoffFamily {
    /// Cutoffs with the default tubular radius `ε₀ = 0.1`.
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        Self::with_epsilon0(d, lambda, DEFAULT_EPSILON0)
    }

    /// Cutoffs admitting `0 < λ < λ₀′` with `λ₀′ = min(1, ε₀^{1/b})`.
    pub fn with_epsilon0(d: usize, lambda: f64, epsilon0: f64) -> Result<Self> {
        let lambda0 = lambda0_prime(epsilon0);
        if !(lambda > 0.0 && lambda < lambda0) {
            return Err(Error::InvalidInput(format!("λ = {lambda} outside (0, {lambda0})")));
        }
        Ok(Self { lambda, width: lambda.powf(CUTOFF_EXPONENT), lines: singular_lines(d) })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Cutoff width `λ^b`.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// `F₁^λ(k) = Π_j (1 − φ(d(k,M_j)/λ^b))`.
    pub fn f1(&self, k: &[f64]) -> f64 {
        self.lines.iter().map(|l| 1.0 - step_profile(l.distance(k) / self.width)).product()
    }

    /// `(Φ₀^λ, Φ₁^λ)` for the momentum triple.
    pub fn phi(&self, k1: &[f64], k2: &[f64], k3: &[f64]) -> (f64, f64) {
        let add = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
        let p1 = self.f1(&add(k1, k2)) * self.f1(&add(k2, k3)) * self.f1(&add(k3, k1));
        (1.0 - p1, p1)
    }
}

/// Largest admissible coupling for tubular radius `ε₀`.
pub fn lambda0_prime(epsilon0: f64) -> f64 {
    epsilon0.powf(1.0 / CUTOFF_EXPONENT).min(1.0)
}

/// `Π_ν |sin 2πu^ν|^{−1/7}`, the shape of the crossing weight for nearest-neighbour hopping.
pub fn crossing_weight(u: &[f64]) -> f64 {
    u.iter().map(|v| (2.0 * PI * v).sin().abs().powf(-1.0 / 7.0)).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub t: f64,
    pub value: f64,
}

/// Decay fit of `‖p_t‖₃³ ≈ C⟨t⟩^{−a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub d: usize,
    pub exponent: f64,
    pub exponent_err: f64,
    pub constant: f64,
    pub t_range: (f64, f64),
    #[serde(rename = "M")]
    pub m: usize,
    pub samples: Vec<DecaySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSample {
    pub t: f64,
    pub k0: Vec<f64>,
    pub value: f64,
    pub distance: f64,
    /// `|I|·⟨t⟩·d(k₀,M^sing)`, absent for skipped samples.
    pub scaled: Option<f64>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceReport {
    pub d: usize,
    pub sigma: i8,
    pub constant: f64,
    pub samples: Vec<InterferenceSample>,
}

/// Sampled crossing ratios and their empirical constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub d: usize,
    pub sigma: (i8, i8),
    pub constant: f64,
    pub ratios: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_simpson;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nn(d: usize) -> DispersionRelation {
        DispersionRelation::nearest_neighbor(d, d as f64)
    }

    fn random_k(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn omega_examples() {
        let w = nn(3);
        assert_eq!(w.omega(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((w.omega(&[0.5, 0.5, 0.5]).unwrap() - 6.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let k = random_k(&mut rng, 3);
            let mk: Vec<f64> = k.iter().map(|v| -v).collect();
            assert_eq!(w.omega(&k).unwrap(), w.omega(&mk).unwrap());
        }
    }

    #[test]
    fn tabulated_lookup_and_rejection() {
        let nnw = nn(2);
        let vals: Vec<f64> = nnw.grid(16).unwrap().into_iter().map(|v| v - 2.0).collect();
        let tab = DispersionRelation::tabulated(2, 2.0, 16, vals.clone(), false).unwrap();
        assert!((tab.omega(&[0.25, 0.125]).unwrap() - nnw.omega(&[0.25, 0.125]).unwrap()).abs() < 1e-14);
        assert!(tab.omega(&[0.01, 0.0]).is_err());
        let tab = DispersionRelation::tabulated(2, 2.0, 16, vals, true).unwrap();
        let v = tab.omega(&[0.01, 0.0]).unwrap();
        assert!((v - nnw.omega(&[0.01, 0.0]).unwrap()).abs() < 2e-2);
        assert!(DispersionRelation::tabulated(1, 0.0, 4, vec![0.0, 1.0, 2.0, 3.0], false).is_err());
    }

    #[test]
    fn propagator_at_zero_time_is_point_mass() {
        let w = nn(2);
        let block = w.propagator_block(0.0, 16).unwrap();
        assert!((block[0] - 1.0).norm() < 1e-14);
        assert!(block[1..].iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn propagator_matches_quadrature_oracle() {
        let w = DispersionRelation::nearest_neighbor(1, 0.0);
        let oracle = |x: i64, t: f64| {
            let f = move |p: f64| Complex64::from_polar(1.0, p * x as f64 + t * p.cos()) / (2.0 * PI);
            adaptive_simpson(&f, 0.0, 2.0 * PI, 1e-12, 30)
        };
        let p = w.free_propagator(2.0, &[0], 16).unwrap();
        assert!((p.norm() - 0.223_890_779_141_235_67).abs() < 1e-8);
        for x in -5..=5 {
            let p = w.free_propagator(2.0, &[x], 16).unwrap();
            assert!((p - oracle(x, 2.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn propagator_rejects_aliasing() {
        let w = nn(2);
        assert!(w.free_propagator(1.0, &[8, 0], 16).is_err());
        assert!(w.free_propagator(1.0, &[7, 0], 16).is_ok());
        assert!(w.free_propagator(1.0, &[0, 0], 15).is_err());
    }

    #[test]
    fn tabulated_propagator_matches_factorized() {
        let nnw = nn(2);
        let tab = DispersionRelation::tabulated(2, 0.0, 32, nnw.grid(32).unwrap(), false).unwrap();
        for x in [[0i64, 0], [1, -2], [3, 1]] {
            let a = nnw.free_propagator(2.5, &x, 32).unwrap();
            let b = tab.free_propagator(2.5, &x, 32).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn k_function_reduces_to_propagator() {
        let w = nn(3);
        let z = [0.0; 3];
        let u = [0.3, 0.1, 0.7];
        for x in [[0i64, 0, 0], [1, 2, -1], [-3, 0, 4]] {
            let p = w.free_propagator(4.0, &x, 32).unwrap();
            let k = w.k_function(&x, 4.0, 0.0, 0.0, &u, &z, 32).unwrap();
            assert!((p - k).norm() < 1e-10);
            let k0 = w.k_function(&x, 0.0, 0.0, 0.0, &u, &u, 32).unwrap();
            let expect = if x == [0, 0, 0] { 1.0 } else { 0.0 };
            assert!((k0 - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn k_function_matches_dense_riemann_sum() {
        let w = DispersionRelation::nearest_neighbor(1, 1.0);
        let m = 16;
        let dense = 4 * m;
        for x in -4i64..=4 {
            let k = w.k_function(&[x], 3.0, 1.0, 0.0, &[0.25], &[0.0], m).unwrap();
            let oracle: Complex64 = (0..dense)
                .map(|j| {
                    let kk = j as f64 / dense as f64;
                    let ph = 2.0 * PI * x as f64 * kk
                        - (3.0 * w.omega(&[kk]).unwrap() + w.omega(&[kk + 0.25]).unwrap());
                    Complex64::from_polar(1.0, ph)
                })
                .sum::<Complex64>()
                / dense as f64;
            assert!((k - oracle).norm() < 1e-8);
        }
    }

    #[test]
    fn propagator_time_reversal() {
        let w = nn(2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let t = rng.random_range(-20.0..20.0);
            let x = [rng.random_range(-6i64..7), rng.random_range(-6i64..7)];
            let a = w.free_propagator(t, &x, 32).unwrap();
            let b = w.free_propagator(-t, &x, 32).unwrap();
            assert!((a - b.conj()).norm() < 1e-12);
            let na = w.propagator_norm3_cubed(t, 32).unwrap();
            let nb = w.propagator_norm3_cubed(-t, 32).unwrap();
            assert!((na - nb).abs() < 1e-12 * na);
        }
    }

    #[test]
    fn k_norm_invariant_under_time_sign_flip() {
        let w = nn(3);
        let u1 = [0.1, 0.4, 0.25];
        let u2 = [0.3, 0.05, 0.6];
        let a = w.k_norm3(5.0, -2.0, 3.0, &u1, &u2).unwrap();
        let b = w.k_norm3(-5.0, 2.0, -3.0, &u1, &u2).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn singular_distance_examples() {
        assert_eq!(distance_to_singular(&[0.0, 0.5, 0.0, 0.37]), 0.0);
        assert!((distance_to_singular(&[0.25, 0.25, 0.0]) - 0.25).abs() < 1e-15);
        assert!((distance_to_singular(&[0.25; 4]) - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn singular_distance_matches_grid_minimization() {
        let d = 3;
        let lines = singular_lines(d);
        assert_eq!(lines.len(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let k = random_k(&mut rng, d);
            let brute = lines
                .iter()
                .map(|l| {
                    let dist_at = |s: f64| {
                        let mut p = l.anchor.clone();
                        p[l.free_axis] = s;
                        k.iter().zip(&p).map(|(a, b)| torus_dist(*a, *b).powi(2)).sum::<f64>().sqrt()
                    };
                    let n = 2000;
                    let best = (0..n).min_by(|&a, &b| dist_at(a as f64 / n as f64).total_cmp(&dist_at(b as f64 / n as f64))).unwrap();
                    let (mut lo, mut hi) = ((best as f64 - 1.0) / n as f64, (best as f64 + 1.0) / n as f64);
                    for _ in 0..100 {
                        let a = lo + (hi - lo) / 3.0;
                        let b = hi - (hi - lo) / 3.0;
                        if dist_at(a) < dist_at(b) {
                            hi = b;
                        } else {
                            lo = a;
                        }
                    }
                    dist_at(0.5 * (lo + hi))
                })
                .fold(f64::INFINITY, f64::min);
            assert!((brute - distance_to_singular(&k)).abs() < 1e-6);
        }
    }

    #[test]
    fn step_profile_shape() {
        assert_eq!(step_profile(0.0), 1.0);
        assert_eq!(step_profile(0.5), 1.0);
        assert_eq!(step_profile(1.5), 0.0);
        assert_eq!(step_profile(-1.0), 0.0);
        let v = step_profile(0.75);
        assert!(v > 0.0 && v < 1.0);
        let mut prev = 1.0;
        for j in 0..=1000 {
            let x = 0.5 + 0.5 * j as f64 / 1000.0;
            let v = step_profile(x);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn cutoff_examples() {
        let d = 3;
        assert!(CutoffFamily::new(d, 0.1).is_err());
        assert!(CutoffFamily::new(d, 0.0).is_err());
        let cut = CutoffFamily::new(d, 0.01).unwrap();
        let k1 = [0.13, 0.27, 0.61];
        let k2 = [-0.13, -0.27, -0.61];
        let k3 = [0.2, 0.3, 0.33];
        assert_eq!(cut.phi(&k1, &k2, &k3), (1.0, 0.0));
        let a = [0.2, 0.13, 0.08];
        let b = [0.05, 0.1, 0.3];
        let c = [0.1, 0.02, 0.07];
        let (p0, p1) = cut.phi(&a, &b, &c);
        assert_eq!((p0, p1), (0.0, 1.0));
        assert_eq!(cut.phi(&c, &b, &a).1, p1);
    }

    #[test]
    fn cutoff_bounds_on_random_triples() {
        let d = 3;
        let cut = CutoffFamily::new(d, 0.04).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c1: f64 = 0.0;
        for _ in 0..1000 {
            let k: Vec<Vec<f64>> = (0..3).map(|_| random_k(&mut rng, d)).collect();
            let (p0, p1) = cut.phi(&k[0], &k[1], &k[2]);
            assert!((p0 + p1 - 1.0).abs() < 1e-15 && (0.0..=1.0).contains(&p0));
            let sum = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
            let count = [(0, 1), (1, 2), (2, 0)]
                .iter()
                .filter(|(i, j)| distance_to_singular(&sum(&k[*i], &k[*j])) < cut.width())
                .count();
            assert!(p0 <= count as f64 + 1e-15);
            assert_eq!(cut.phi(&k[2], &k[1], &k[0]).1, p1);
            let dist = distance_to_singular(&k[0]);
            if dist > 0.0 {
                c1 = c1.max(cut.f1(&k[0]) * cut.width() / dist);
            }
        }
        // 1 − φ(s) vanishes for s ≤ 1/2, so F₁ ≤ 2 d/λ^b.
        assert!(c1 <= 2.0);
    }

    #[test]
    fn dr2_small_time_and_trend() {
        let w = nn(3);
        assert!((w.propagator_norm3_cubed(0.0, 16).unwrap() - 1.0).abs() < 1e-12);
        let grid: Vec<f64> = (0..12).map(|i| 5.0 * (20f64).powf(i as f64 / 11.0)).collect();
        let rep = w.verify_dr2(&grid, 64).unwrap();
        assert!(rep.exponent >= 9.0 / 7.0 - 0.05, "exponent {}", rep.exponent);
        let v10 = w.propagator_norm3_cubed(10.0, 64).unwrap();
        assert!(v10 <= rep.constant * japanese(10.0).powf(-9.0 / 7.0) * 1.5);
        assert!(w.verify_dr2(&[5.0, 6.0, 7.0], 64).is_err());
    }

    #[test]
    fn dr3_matches_quadrature_and_handles_singular() {
        let w = nn(2);
        let k0 = vec![0.3, 0.2];
        for sigma in [1i8, -1] {
            let t = 6.0;
            let closed = w.interference_integral(t, &k0, sigma);
            let m = 256;
            let lat = LatticeConfig::new(2, m).unwrap();
            let direct: Complex64 = (0..lat.volume())
                .map(|i| {
                    let k = lat.momentum(i);
                    let km: Vec<f64> = k.iter().zip(&k0).map(|(a, b)| a - b).collect();
                    let ph = -t * (w.omega(&k).unwrap() + sigma as f64 * w.omega(&km).unwrap());
                    Complex64::from_polar(1.0, ph)
                })
                .sum::<Complex64>()
                / lat.volume() as f64;
            assert!((closed - direct.norm()).abs() < 1e-10);
        }
        let rep = w.verify_dr3(&[0.0, 10.0, 50.0], &[k0.clone(), vec![0.0, 0.5]], -1).unwrap();
        assert!(rep.samples.iter().filter(|s| s.k0 == vec![0.0, 0.5]).all(|s| s.skipped));
        assert!(rep.samples.iter().filter_map(|s| s.scaled).all(|v| v <= rep.constant));
        let at_zero = rep.samples.iter().find(|s| s.t == 0.0 && !s.skipped).unwrap();
        assert!((at_zero.value - 1.0).abs() < 1e-14);
        assert!(at_zero.value <= rep.constant / at_zero.distance);
    }

    #[test]
    fn crossing_weight_is_positive() {
        assert!(crossing_weight(&[0.25, 0.25]) == 1.0);
        assert!(crossing_weight(&[0.01, 0.3]) > 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn distance_vanishes_on_lines(nu in 0usize..4, bits in 0usize..8, s in 0.0f64..1.0) {
                let lines = singular_lines(4);
                let l = &lines[nu * 8 + bits];
                let mut p = l.anchor.clone();
                p[l.free_axis] = s;
                prop_assert!(distance_to_singular(&p) < 1e-15);
                prop_assert!(l.distance(&p) < 1e-15);
            }

            #[test]
            fn phi_partition_of_unity(a in proptest::collection::vec(0.0f64..1.0, 9)) {
                let cut = CutoffFamily::new(3, 0.03).unwrap();
                let (p0, p1) = cut.phi(&a[0..3], &a[3..6], &a[6..9]);
                prop_assert!((p0 + p1 - 1.0).abs() < 1e-15);
                prop_assert!((0.0..=1.0).contains(&p1));
                prop_assert_eq!(cut.phi(&a[6..9], &a[3..6], &a[0..3]).1, p1);
            }
        }
    }

    #[test]
    fn crossing_constant_bounds_every_sample() {
        let disp = DispersionRelation::nearest_neighbor(2, 2.0);
        let samples = vec![
            (vec![0.1, 0.3], vec![0.35, 0.05], 1.0),
            (vec![0.1, 0.3], vec![0.35, 0.05], 0.5),
            (vec![0.2, 0.2], vec![0.45, 0.3], 0.5),
        ];
        let rep = disp.dr4_crossing_report(&samples, (1, -1), 8.0, 0.25).unwrap();
        assert_eq!(rep.ratios.len(), 3);
        assert!(rep.ratios.iter().all(|r| r.is_finite() && *r > 0.0 && *r <= rep.constant));
        assert!(rep.ratios.contains(&rep.constant));
        assert!(disp.dr4_crossing_report(&[], (1, 1), 8.0, 0.25).is_err());
    }
}
