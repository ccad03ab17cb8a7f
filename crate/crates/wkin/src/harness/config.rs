//! Experiment configuration read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionRelation;
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::gibbs::{GibbsParams, LatticeModel, MetropolisConfig};
use crate::kinetics::QuadratureConfig;
use crate::lattice::LatticeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

/// Nearest-neighbour dispersion `ω = c − Σcos 2πk`; `c` defaults to `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    pub c: Option<f64>,
}

fn default_kind() -> String {
    "nearest-neighbor".into()
}

impl Default for DispersionSection {
    fn default() -> Self {
        Self { kind: default_kind(), c: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    pub beta: f64,
    pub mu: f64,
    #[serde(default)]
    pub metropolis: MetropolisConfig,
}

/// Time step of the split-step integrator; derived from the record times
/// when absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: Option<f64>,
}

/// Everything needed to reproduce one covariance experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeSection,
    #[serde(default)]
    pub dispersion: DispersionSection,
    pub gibbs: GibbsSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub lambdas: Vec<f64>,
    /// Record times in kinetic units `τ`; the microscopic time is `τ/λ²`,
    /// or `τ` itself when `λ = 0`.
    pub times: Vec<f64>,
    /// Momenta of the covariance series, each on the dual lattice.
    pub modes: Vec<Vec<f64>>,
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Realizations per batch of the batch-mean errors.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_batch() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lattice_config(&self) -> Result<LatticeConfig> {
        LatticeConfig::new(self.lattice.d, self.lattice.l).map_err(config_error)
    }

    pub fn dispersion(&self) -> Result<DispersionRelation> {
        if self.dispersion.kind != "nearest-neighbor" {
            return Err(Error::Config(format!("unsupported dispersion kind {:?}", self.dispersion.kind)));
        }
        let d = self.lattice.d;
        Ok(DispersionRelation::nearest_neighbor(d, self.dispersion.c.unwrap_or(d as f64)))
    }

    /// The lattice model at coupling `lambda`.
    pub fn model(&self, lambda: f64) -> Result<LatticeModel> {
        let disp = self.dispersion()?;
        let params = GibbsParams::new(self.gibbs.beta, self.gibbs.mu, lambda, &disp).map_err(config_error)?;
        LatticeModel::new(self.lattice_config()?, disp, params).map_err(config_error)
    }

    /// Microscopic record times `τ/λ²` at coupling `lambda`.
    pub fn micro_times(&self, lambda: f64) -> Vec<f64> {
        let scale = if lambda > 0.0 { 1.0 / (lambda * lambda) } else { 1.0 };
        self.times.iter().map(|t| t * scale).collect()
    }

    /// Time step at coupling `lambda`: the configured one, or the largest
    /// step below `0.05/‖ω‖∞` dividing the shortest nonzero record time.
    pub fn dt(&self, lambda: f64) -> Result<f64> {
        if let Some(dt) = self.integrator.dt {
            return Ok(dt);
        }
        let model = self.model(lambda)?;
        let dt_max = IntegratorConfig::default_dt(&model);
        let shortest = self.micro_times(lambda).iter().map(|t| t.abs()).filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
        Ok(if shortest.is_finite() { IntegratorConfig::commensurate_dt(shortest, dt_max) } else { dt_max })
    }

    /// Dual-lattice indices of the configured modes.
    pub fn mode_indices(&self) -> Result<Vec<usize>> {
        let lat = self.lattice_config()?;
        self.modes
            .iter()
            .map(|k| {
                if k.len() != lat.d() {
                    return Err(Error::Config(format!("mode {k:?} has the wrong dimension")));
                }
                lat.momentum_index(k).ok_or_else(|| Error::Config(format!("mode {k:?} is not on the dual lattice")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice_config()?;
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Config("lambdas must be a nonempty list of nonnegative couplings".into()));
        }
        if self.times.is_empty() || self.times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("times must be a nonempty list of finite values".into()));
        }
        if self.realizations < 2 {
            return Err(Error::Config("at least two realizations are needed for error bars".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("modes must not be empty".into()));
        }
        self.mode_indices()?;
        self.quadrature.validate().map_err(config_error)?;
        for &lambda in &self.lambdas {
            self.model(lambda)?;
            let dt = self.dt(lambda)?;
            let mut abs: Vec<f64> = self.micro_times(lambda).iter().map(|t| t.abs()).collect();
            abs.sort_by(f64::total_cmp);
            abs.dedup();
            IntegratorConfig::new(dt, abs).map_err(|e| Error::Config(format!("λ = {lambda}: {e}")))?;
        }
        Ok(())
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) => Error::Config(m),
        other => other,
    }
}
