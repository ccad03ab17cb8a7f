//! Strang split-step integration of the finite-volume discrete NLS
//! `i∂_tψ = αψ + λ|ψ|²ψ`.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{energy_parts, LatticeModel};
use crate::lattice::{FieldState, Representation};

/// Time step and recording schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub record_times: Vec<f64>,
}

impl IntegratorConfig {
    /// Validates `dt > 0` and that the record times are nonnegative, strictly
    /// increasing multiples of `dt`.
    pub fn new(dt: f64, record_times: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let mut prev = -1.0;
        for &t in &record_times {
            if t < 0.0 || t <= prev {
                return Err(Error::InvalidInput("record times must be nonnegative and strictly increasing".into()));
            }
            let n = (t / dt).round();
            if (n * dt - t).abs() > 1e-12 * t.abs().max(1.0) {
                return Err(Error::InvalidInput(format!("record time {t} is not a multiple of dt = {dt}")));
            }
            prev = t;
        }
        Ok(Self { dt, record_times })
    }

    /// `dt = 0.05/‖ω‖∞`.
    pub fn default_dt(model: &LatticeModel) -> f64 {
        0.05 / model.dispersion.sup_norm().max(1e-12)
    }

    /// Largest step not exceeding `dt_max` that divides `horizon` into an
    /// integer number of steps.
    pub fn commensurate_dt(horizon: f64, dt_max: f64) -> f64 {
        if horizon <= 0.0 {
            return dt_max;
        }
        horizon / (horizon / dt_max).ceil()
    }

    fn step_counts(&self) -> Vec<u64> {
        self.record_times.iter().map(|t| (t / self.dt).round() as u64).collect()
    }
}

/// Split-step propagator for a fixed model and time step.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    model: LatticeModel,
    dt: f64,
    linear: Vec<Complex64>,
}

impl SplitStepper {
    pub fn new(model: &LatticeModel, dt: f64) -> Self {
        let linear = model.omega().iter().map(|&w| Complex64::from_polar(1.0, -w * dt)).collect();
        Self { model: model.clone(), dt, linear }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Exact flow of the quartic part for time `tau`.
    fn kick(&self, site: &mut [Complex64], tau: f64) {
        let lam = self.model.params.lambda;
        if lam == 0.0 {
            return;
        }
        for v in site.iter_mut() {
            *v *= Complex64::from_polar(1.0, -lam * v.norm_sqr() * tau);
        }
    }

    /// Exact flow of the quadratic part for one step; leaves `site` in site
    /// space.
    fn linear_step(&self, site: &mut [Complex64]) {
        let fft = self.model.fft();
        fft.forward(site);
        for (v, p) in site.iter_mut().zip(&self.linear) {
            *v *= p;
        }
        fft.inverse(site);
    }

    /// One Strang step: half kick, linear step, half kick.
    pub fn step(&self, site: &mut [Complex64]) {
        self.kick(site, 0.5 * self.dt);
        self.linear_step(site);
        self.kick(site, 0.5 * self.dt);
    }

    /// `n` Strang steps with consecutive half kicks merged.
    pub fn advance(&self, site: &mut [Complex64], n: u64) {
        if n == 0 {
            return;
        }
        self.kick(site, 0.5 * self.dt);
        for i in 0..n {
            self.linear_step(site);
            let tau = if i + 1 == n { 0.5 * self.dt } else { self.dt };
            self.kick(site, tau);
        }
    }
}

/// One Strang step of length `dt` (which may be negative).
pub fn step(field: &FieldState, dt: f64, model: &LatticeModel) -> FieldState {
    let mut site = field.to_site();
    SplitStepper::new(model, dt).step(&mut site.values);
    site
}

/// `(t, N, H)` at one record time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationRecord {
    pub t: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

/// Spectral snapshots at the record times and the conservation log.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: FieldState,
    pub times: Vec<f64>,
    pub snapshots: Vec<FieldState>,
    pub log: Vec<ConservationRecord>,
}

/// Selected spectral modes at the record times and the conservation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTrajectory {
    pub modes: Vec<usize>,
    pub initial: Vec<Complex64>,
    pub times: Vec<f64>,
    /// `values[r][j]` is `ψ̂_t(k_j)` at record `r`.
    pub values: Vec<Vec<Complex64>>,
    pub log: Vec<ConservationRecord>,
}

fn record(site: &[Complex64], model: &LatticeModel, t: f64) -> Result<(Vec<Complex64>, ConservationRecord)> {
    if site.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonConvergence(format!("field overflow at t = {t}; reduce dt")));
    }
    let mut spec = site.to_vec();
    model.fft().forward(&mut spec);
    let n = site.iter().map(|v| v.norm_sqr()).sum();
    let h = energy_parts(site, &spec, model);
    Ok((spec, ConservationRecord { t, n, h }))
}

fn run<F>(field: &FieldState, config: &IntegratorConfig, model: &LatticeModel, mut sink: F) -> Result<Vec<ConservationRecord>>
where
    F: FnMut(Vec<Complex64>),
{
    if field.lattice != model.lattice {
        return Err(Error::InvalidInput("field and model lattices differ".into()));
    }
    let stepper = SplitStepper::new(model, config.dt);
    let mut site = field.to_site().values;
    let mut done = 0u64;
    let mut log = Vec::with_capacity(config.record_times.len());
    for (&target, &t) in config.step_counts().iter().zip(&config.record_times) {
        stepper.advance(&mut site, target - done);
        done = target;
        let (spec, rec) = record(&site, model, t)?;
        sink(spec);
        log.push(rec);
    }
    Ok(log)
}

/// Evolves `field` and records full spectral snapshots at the record times.
pub fn evolve(field: &FieldState, config: &IntegratorConfig, model: &LatticeModel) -> Result<Trajectory> {
    let mut snapshots = Vec::with_capacity(config.record_times.len());
    let lat = model.lattice;
    let log = run(field, config, model, |spec| {
        snapshots.push(FieldState { lattice: lat, values: spec, repr: Representation::Spectral })
    })?;
    Ok(Trajectory { initial: field.clone(), times: config.record_times.clone(), snapshots, log })
}

/// Evolves `field` and stores only the requested spectral modes.
pub fn evolve_modes(field: &FieldState, config: &IntegratorConfig, model: &LatticeModel, modes: &[usize]) -> Result<ModeTrajectory> {
    if modes.iter().any(|&k| k >= model.volume()) {
        return Err(Error::InvalidInput("mode index outside the dual lattice".into()));
    }
    let spec0 = field.to_spectral();
    let initial = modes.iter().map(|&k| spec0.values[k]).collect();
    let mut values = Vec::with_capacity(config.record_times.len());
    let log = run(field, config, model, |spec| values.push(modes.iter().map(|&k| spec[k]).collect()))?;
    Ok(ModeTrajectory { modes: modes.to_vec(), initial, times: config.record_times.clone(), values, log })
}

/// Maximal relative drifts of `N` and `H` against the first record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub max_n_drift: f64,
    pub max_h_drift: f64,
    pub records: Vec<ConservationRecord>,
}

pub fn conservation_report(log: &[ConservationRecord]) -> Result<ConservationReport> {
    let first = log.first().ok_or_else(|| Error::InvalidInput("empty conservation log".into()))?;
    let rel = |a: f64, b: f64| if b != 0.0 { (a - b).abs() / b.abs() } else { a.abs() };
    let max_n_drift = log.iter().map(|r| rel(r.n, first.n)).fold(0.0, f64::max);
    let max_h_drift = log.iter().map(|r| rel(r.h, first.h)).fold(0.0, f64::max);
    Ok(ConservationReport { max_n_drift, max_h_drift, records: log.to_vec() })
}

/// Writes the conservation log as CSV with columns `t, N, H`.
pub fn write_conservation_csv(path: &Path, log: &[ConservationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the trajectory snapshots as consecutive `WKIN1` records.
pub fn write_snapshots<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    for s in &traj.snapshots {
        crate::lattice::write_snapshot(&mut w, s)?;
    }
    Ok(())
}
