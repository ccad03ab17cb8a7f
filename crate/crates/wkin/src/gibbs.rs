//! Finite-volume Gibbs measure: parameters, Hamiltonian, exact Gaussian
//! sampling at zero coupling, site-wise Metropolis sampling at positive
//! coupling, and ensemble estimators.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dispersion::{DispersionKind, DispersionRelation};
use crate::error::{Error, Result};
use crate::lattice::{FieldState, LatticeConfig, NdFft, Representation};
use crate::stats::{integrated_autocorrelation_time, jackknife, jackknife_stderr, BatchMeans, Estimate};

/// Inverse temperature, chemical potential and quartic coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsParams {
    pub beta: f64,
    pub mu: f64,
    pub lambda: f64,
}

impl GibbsParams {
    /// Validates `β > 0`, `λ ≥ 0` and `β(ω(k) − μ) > 0` for every `k`.
    pub fn new(beta: f64, mu: f64, lambda: f64, disp: &DispersionRelation) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidInput(format!("β must be positive, got {beta}")));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("λ must be nonnegative, got {lambda}")));
        }
        if !(mu < disp.infimum()) {
            return Err(Error::InvalidInput(format!("μ = {mu} must lie below inf ω = {}", disp.infimum())));
        }
        Ok(Self { beta, mu, lambda })
    }

    /// `W(k) = 1/(β(ω(k) − μ))` at a given frequency.
    pub fn covariance_at(&self, omega: f64) -> f64 {
        1.0 / (self.beta * (omega - self.mu))
    }
}

/// A lattice, dispersion relation and Gibbs parameters with `ω` and `W`
/// tabulated on the dual lattice.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub lattice: LatticeConfig,
    pub dispersion: DispersionRelation,
    pub params: GibbsParams,
    omega: Vec<f64>,
    w: Vec<f64>,
    fft: NdFft,
}

impl LatticeModel {
    pub fn new(lattice: LatticeConfig, dispersion: DispersionRelation, params: GibbsParams) -> Result<Self> {
        if dispersion.d != lattice.d() {
            return Err(Error::InvalidInput("dispersion and lattice dimensions differ".into()));
        }
        let omega: Vec<f64> = (0..lattice.volume())
            .map(|i| dispersion.omega(&lattice.momentum(i)))
            .collect::<Result<_>>()?;
        let params = GibbsParams::new(params.beta, params.mu, params.lambda, &dispersion)?;
        let w = omega.iter().map(|&o| params.covariance_at(o)).collect();
        Ok(Self { lattice, dispersion, params, omega, w, fft: NdFft::new(lattice) })
    }

    /// Copy of the model with a different coupling.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut p = self.params;
        p.lambda = lambda;
        Self::new(self.lattice, self.dispersion.clone(), p)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn covariance(&self) -> &[f64] {
        &self.w
    }

    pub fn fft(&self) -> &NdFft {
        &self.fft
    }

    pub fn volume(&self) -> usize {
        self.lattice.volume()
    }

    /// `∫_{Λ*} W dk`.
    pub fn mean_covariance(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.volume() as f64
    }
}

/// Counter-based generator for realization `index` of experiment `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `N(ψ) = Σ_x |ψ(x)|²`, computed in whichever representation the field holds.
pub fn particle_number(field: &FieldState) -> f64 {
    let s: f64 = field.values.iter().map(|v| v.norm_sqr()).sum();
    match field.repr {
        Representation::Site => s,
        Representation::Spectral => s / field.lattice.volume() as f64,
    }
}

/// `H(ψ) = ∫dk ω(k)|ψ̂(k)|² + (λ/2) Σ_x |ψ(x)|⁴` for a site-space field.
pub fn hamiltonian(field: &FieldState, model: &LatticeModel) -> Result<f64> {
    if field.repr != Representation::Site {
        return Err(Error::InvalidInput("hamiltonian expects a site-space field".into()));
    }
    let mut spec = field.values.clone();
    model.fft.forward(&mut spec);
    Ok(energy_parts(&field.values, &spec, model))
}

/// Hamiltonian from matching site and spectral values.
pub(crate) fn energy_parts(site: &[Complex64], spec: &[Complex64], model: &LatticeModel) -> f64 {
    let vol = model.volume() as f64;
    let quad: f64 = spec.iter().zip(&model.omega).map(|(v, w)| w * v.norm_sqr()).sum::<f64>() / vol;
    let quart: f64 = site.iter().map(|v| v.norm_sqr().powi(2)).sum();
    quad + 0.5 * model.params.lambda * quart
}

/// Exact sample of the Gaussian measure with spectral covariance `W`:
/// independent circular complex normals with `E|ψ̂(k)|² = |Λ|W(k)`.
pub fn sample_gaussian<R: Rng + ?Sized>(model: &LatticeModel, rng: &mut R) -> FieldState {
    let vol = model.volume() as f64;
    let mut values: Vec<Complex64> = model
        .w
        .iter()
        .map(|&w| {
            let s = (vol * w / 2.0).sqrt();
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            Complex64::new(s * g1, s * g2)
        })
        .collect();
    model.fft.inverse(&mut values);
    FieldState { lattice: model.lattice, values, repr: Representation::Site }
}

/// Settings of the site-wise Metropolis sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetropolisConfig {
    /// Burn-in length in sweeps.
    pub burn_in: usize,
    /// Sweeps between emitted states; `None` uses twice the measured
    /// integrated autocorrelation time of `H`.
    pub thin: Option<usize>,
    pub target_acceptance: f64,
    pub acceptance_band: (f64, f64),
    /// Sweeps used to measure the autocorrelation time after burn-in.
    pub pilot_sweeps: usize,
}

impl Default for MetropolisConfig {
    fn default() -> Self {
        Self { burn_in: 1000, thin: None, target_acceptance: 0.4, acceptance_band: (0.25, 0.6), pilot_sweeps: 2000 }
    }
}

/// Mutable state of one Metropolis chain.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub field: Vec<Complex64>,
    pub rng: ChaCha8Rng,
    pub scale: f64,
    pub accepted: u64,
    pub proposed: u64,
    pub sweeps_done: usize,
    pub burned_in: bool,
}

/// Site-wise random-walk Metropolis chain for `e^{−β(H−μN)}` with
/// nearest-neighbour hopping.
#[derive(Debug, Clone)]
pub struct MetropolisChain {
    model: LatticeModel,
    config: MetropolisConfig,
    neighbors: Vec<usize>,
    degree: usize,
    pub state: SamplerState,
    thin: usize,
}

impl MetropolisChain {
    /// Starts a chain from an exact Gaussian sample.
    pub fn new(model: &LatticeModel, config: MetropolisConfig, mut rng: ChaCha8Rng) -> Result<Self> {
        if !matches!(model.dispersion.kind, DispersionKind::NearestNeighbor) {
            return Err(Error::InvalidInput("the Metropolis sampler requires nearest-neighbour hopping".into()));
        }
        let lat = model.lattice;
        let d = lat.d();
        let mut neighbors = Vec::with_capacity(lat.volume() * 2 * d);
        for i in 0..lat.volume() {
            let x: Vec<i64> = lat.coords(i).into_iter().map(|v| v as i64).collect();
            for a in 0..d {
                for s in [1i64, -1] {
                    let mut y = x.clone();
                    y[a] += s;
                    neighbors.push(lat.index(&y));
                }
            }
        }
        let field = sample_gaussian(model, &mut rng).values;
        let state = SamplerState {
            field,
            rng,
            scale: 0.5 * model.mean_covariance().sqrt(),
            accepted: 0,
            proposed: 0,
            sweeps_done: 0,
            burned_in: false,
        };
        Ok(Self { model: model.clone(), config, neighbors, degree: 2 * d, state, thin: config.thin.unwrap_or(1).max(1) })
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn thin(&self) -> usize {
        self.thin
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.state.proposed == 0 {
            0.0
        } else {
            self.state.accepted as f64 / self.state.proposed as f64
        }
    }

    /// Change of `β(H − μN)` when site `x` moves from `old` to `new`.
    pub fn action_change(&self, x: usize, old: Complex64, new: Complex64) -> f64 {
        let p = &self.model.params;
        let c = self.model.dispersion.c;
        let mut h = Complex64::new(0.0, 0.0);
        for &y in &self.neighbors[x * self.degree..(x + 1) * self.degree] {
            h += self.state.field[y];
        }
        h *= -0.5;
        let (n_old, n_new) = (old.norm_sqr(), new.norm_sqr());
        let dh = c * (n_new - n_old) + 2.0 * ((new - old).conj() * h).re + 0.5 * p.lambda * (n_new * n_new - n_old * n_old);
        p.beta * (dh - p.mu * (n_new - n_old))
    }

    /// One systematic sweep over all sites; returns the number of accepted moves.
    pub fn sweep(&mut self) -> usize {
        let mut acc = 0;
        let vol = self.model.volume();
        for x in 0..vol {
            let g1: f64 = self.state.rng.sample(StandardNormal);
            let g2: f64 = self.state.rng.sample(StandardNormal);
            let old = self.state.field[x];
            let new = old + self.state.scale * Complex64::new(g1, g2);
            let da = self.action_change(x, old, new);
            let u: f64 = self.state.rng.random();
            if da <= 0.0 || u < (-da).exp() {
                self.state.field[x] = new;
                acc += 1;
            }
        }
        self.state.accepted += acc as u64;
        self.state.proposed += vol as u64;
        self.state.sweeps_done += 1;
        acc
    }

    /// Runs the burn-in, adapting the proposal scale towards the target
    /// acceptance, then fixes the thinning interval.
    pub fn burn_in(&mut self) -> Result<()> {
        let vol = self.model.volume() as f64;
        for i in 0..self.config.burn_in {
            let a = self.sweep() as f64 / vol;
            let gain = 2.0 / (1.0 + i as f64 / 20.0).powf(0.6);
            self.state.scale *= (gain * (a - self.config.target_acceptance)).exp();
        }
        self.state.accepted = 0;
        self.state.proposed = 0;
        let probe = self.config.burn_in.clamp(10, 200);
        for _ in 0..probe {
            self.sweep();
        }
        let rate = self.acceptance_rate();
        let (lo, hi) = self.config.acceptance_band;
        if rate < lo || rate > hi {
            return Err(Error::NonConvergence(format!("acceptance rate {rate:.3} outside [{lo}, {hi}] after tuning")));
        }
        let tau = self.measure_autocorrelation(self.config.pilot_sweeps)?;
        match self.config.thin {
            Some(t) => {
                if tau > t as f64 / 2.0 {
                    return Err(Error::NonConvergence(format!(
                        "autocorrelation time {tau:.2} sweeps exceeds half the thinning interval {t}"
                    )));
                }
                self.thin = t;
            }
            None => self.thin = (2.0 * tau).ceil().max(1.0) as usize,
        }
        self.state.burned_in = true;
        Ok(())
    }

    /// Integrated autocorrelation time of `H` in sweeps over a pilot run.
    pub fn measure_autocorrelation(&mut self, sweeps: usize) -> Result<f64> {
        if sweeps < 8 {
            return Ok(0.5);
        }
        let mut series = Vec::with_capacity(sweeps);
        for _ in 0..sweeps {
            self.sweep();
            series.push(self.current_energy());
        }
        Ok(integrated_autocorrelation_time(&series))
    }

    fn current_energy(&self) -> f64 {
        let mut spec = self.state.field.clone();
        self.model.fft.forward(&mut spec);
        energy_parts(&self.state.field, &spec, &self.model)
    }

    /// Advances `thin` sweeps and returns the current state.
    pub fn next_state(&mut self) -> FieldState {
        for _ in 0..self.thin {
            self.sweep();
        }
        FieldState { lattice: self.model.lattice, values: self.state.field.clone(), repr: Representation::Site }
    }
}

/// Runs a Metropolis chain and collects `count` thinned states.
pub fn metropolis_chain(model: &LatticeModel, rng: ChaCha8Rng, config: MetropolisConfig, count: usize) -> Result<Vec<FieldState>> {
    let mut chain = MetropolisChain::new(model, config, rng)?;
    chain.burn_in()?;
    Ok((0..count).map(|_| chain.next_state()).collect())
}

/// Streaming accumulator of the spectral second moments, the anomalous
/// moments `ψ̂(k)ψ̂(−k)`, `H`, `N` and site-averaged `|ψ|²`, `|ψ|⁴`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    lattice: LatticeConfig,
    spectral: BatchMeans,
    anomalous: BatchMeans,
    scalars: BatchMeans,
}

const SCALAR_H: usize = 0;
const SCALAR_N: usize = 1;
const SCALAR_DENSITY: usize = 2;
const SCALAR_QUARTIC: usize = 3;

impl EnsembleStats {
    pub fn new(lattice: LatticeConfig, batch_size: usize) -> Self {
        let vol = lattice.volume();
        Self {
            lattice,
            spectral: BatchMeans::new(vol, batch_size),
            anomalous: BatchMeans::new(2 * vol, batch_size),
            scalars: BatchMeans::new(4, batch_size),
        }
    }

    pub fn count(&self) -> usize {
        self.scalars.count()
    }

    pub fn lattice(&self) -> LatticeConfig {
        self.lattice
    }

    /// Adds one site-space sample.
    pub fn push(&mut self, field: &FieldState, model: &LatticeModel) {
        let site = field.to_site();
        let mut spec = site.values.clone();
        model.fft.forward(&mut spec);
        let vol = self.lattice.volume();
        let inv = 1.0 / vol as f64;
        let second: Vec<f64> = spec.iter().map(|v| v.norm_sqr() * inv).collect();
        let mut anomalous = Vec::with_capacity(2 * vol);
        for (k, v) in spec.iter().enumerate() {
            let p = v * spec[self.lattice.neg_index(k)] * inv;
            anomalous.push(p.re);
            anomalous.push(p.im);
        }
        let n: f64 = site.values.iter().map(|v| v.norm_sqr()).sum();
        let q: f64 = site.values.iter().map(|v| v.norm_sqr().powi(2)).sum();
        let h = energy_parts(&site.values, &spec, model);
        self.spectral.push(&second);
        self.anomalous.push(&anomalous);
        self.scalars.push(&[h, n, n * inv, q * inv]);
    }

    pub fn merge(&mut self, other: &EnsembleStats) {
        self.spectral.merge(&other.spectral);
        self.anomalous.merge(&other.anomalous);
        self.scalars.merge(&other.scalars);
    }

    /// `E|ψ̂(k)|²/|Λ|` at mode index `k`.
    pub fn second_moment(&self, k: usize) -> Estimate {
        self.spectral.estimate(k)
    }

    /// `E[ψ̂(k)ψ̂(−k)]/|Λ|` as (real, imaginary) estimates.
    pub fn anomalous_moment(&self, k: usize) -> (Estimate, Estimate) {
        (self.anomalous.estimate(2 * k), self.anomalous.estimate(2 * k + 1))
    }

    pub fn energy(&self) -> Estimate {
        self.scalars.estimate(SCALAR_H)
    }

    pub fn particle_number(&self) -> Estimate {
        self.scalars.estimate(SCALAR_N)
    }

    /// Site-averaged `E|ψ(x)|²`.
    pub fn density(&self) -> Estimate {
        self.scalars.estimate(SCALAR_DENSITY)
    }

    /// Site-averaged `E|ψ(x)|⁴`.
    pub fn quartic(&self) -> Estimate {
        self.scalars.estimate(SCALAR_QUARTIC)
    }
}

/// `R₀ = 2E|ψ(0)|²`, averaged over sites.
pub fn estimate_r0(stats: &EnsembleStats) -> Estimate {
    let d = stats.density();
    Estimate::new(2.0 * d.value, 2.0 * d.stderr)
}

/// Leading-order value `2∫W(1 − 2βλ∫W²)`.
pub fn r0_first_order(model: &LatticeModel) -> f64 {
    let vol = model.volume() as f64;
    let w1 = model.mean_covariance();
    let w2 = model.covariance().iter().map(|w| w * w).sum::<f64>() / vol;
    2.0 * w1 * (1.0 - 2.0 * model.params.beta * model.params.lambda * w2)
}

/// Estimated spectral covariance with its deviation from `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub values: Vec<Estimate>,
    /// `max_k |Ŵ(k) − W(k)|`.
    pub max_deviation: f64,
}

pub fn estimate_w_lambda(stats: &EnsembleStats, model: &LatticeModel) -> CovarianceEstimate {
    let values: Vec<Estimate> = (0..stats.lattice.volume()).map(|k| stats.second_moment(k)).collect();
    let max_deviation = values.iter().zip(model.covariance()).map(|(e, w)| (e.value - w).abs()).fold(0.0, f64::max);
    CovarianceEstimate { values, max_deviation }
}

/// Complex estimate with a common standard error for both parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub value: Complex64,
    pub stderr: f64,
}

fn field_value(v: Complex64, sigma: i8) -> Complex64 {
    if sigma > 0 {
        v
    } else {
        v.conj()
    }
}

/// Joint fourth cumulant of `ψ(x_i, σ_i)`, with `ψ(x,+1) = ψ(x)` and
/// `ψ(x,−1) = ψ(x)*`, estimated from site-space samples with translation
/// averaging.  Blocks forbidden by the global phase symmetry are set to zero
/// and the result is exactly zero unless `Σσ = 0`.
pub fn cumulant4(samples: &[FieldState], offsets: &[Vec<i64>; 4], parities: [i8; 4]) -> Result<ComplexEstimate> {
    if parities.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidInput("parities must be ±1".into()));
    }
    if parities.iter().map(|&s| s as i32).sum::<i32>() != 0 {
        return Ok(ComplexEstimate { value: Complex64::new(0.0, 0.0), stderr: 0.0 });
    }
    if samples.len() < 2 {
        return Err(Error::InvalidInput("cumulant estimation needs at least two samples".into()));
    }
    let lat = samples[0].lattice;
    let vol = lat.volume();
    let shifted: Vec<Vec<usize>> = offsets
        .iter()
        .map(|off| {
            (0..vol)
                .map(|y| {
                    let c: Vec<i64> = lat.coords(y).iter().zip(off).map(|(&a, &b)| a as i64 + b).collect();
                    lat.index(&c)
                })
                .collect()
        })
        .collect();
    let pairings: [((usize, usize), (usize, usize)); 3] = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];
    // Per-sample translation averages of the full product and of each pair.
    let mut full = Vec::with_capacity(samples.len());
    let mut pairs = vec![Vec::with_capacity(samples.len()); 6];
    let pair_list: [(usize, usize); 6] = [(0, 1), (2, 3), (0, 2), (1, 3), (0, 3), (1, 2)];
    for s in samples {
        let site = s.to_site();
        let v = |i: usize, y: usize| field_value(site.values[shifted[i][y]], parities[i]);
        let mut acc4 = Complex64::new(0.0, 0.0);
        let mut acc2 = [Complex64::new(0.0, 0.0); 6];
        for y in 0..vol {
            let vals = [v(0, y), v(1, y), v(2, y), v(3, y)];
            acc4 += vals[0] * vals[1] * vals[2] * vals[3];
            for (p, &(a, b)) in pair_list.iter().enumerate() {
                acc2[p] += vals[a] * vals[b];
            }
        }
        full.push(acc4 / vol as f64);
        for p in 0..6 {
            pairs[p].push(acc2[p] / vol as f64);
        }
    }
    let allowed: Vec<bool> = pairings
        .iter()
        .map(|((a, b), (c, d))| parities[*a] + parities[*b] == 0 && parities[*c] + parities[*d] == 0)
        .collect();
    let n = samples.len();
    let stat = |keep: &dyn Fn(usize) -> bool| -> Complex64 {
        let mean = |xs: &[Complex64]| {
            let (s, c) = xs.iter().enumerate().filter(|(i, _)| keep(*i)).fold((Complex64::new(0.0, 0.0), 0usize), |(s, c), (_, v)| (s + v, c + 1));
            s / c as f64
        };
        let mut k = mean(&full);
        for (j, ok) in allowed.iter().enumerate() {
            if *ok {
                k -= mean(&pairs[2 * j]) * mean(&pairs[2 * j + 1]);
            }
        }
        k
    };
    let (value, leave_out) = jackknife(n, n.min(50), stat);
    let re: Vec<f64> = leave_out.iter().map(|v| v.re).collect();
    let im: Vec<f64> = leave_out.iter().map(|v| v.im).collect();
    let stderr = jackknife_stderr(&re).hypot(jackknife_stderr(&im));
    Ok(ComplexEstimate { value, stderr })
}
