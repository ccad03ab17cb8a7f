//! The interaction phase `Ω` and the λ-dependent expansion parameters.

use serde::{Deserialize, Serialize};

use crate::dispersion::{japanese, DispersionRelation};
use crate::error::{Error, Result};

/// `Ω(k, σ) = ω(k₃) − ω(k₁) + σ(ω(k₂) − ω(k₁+k₂+k₃))`.
pub fn omega_vertex(dispersion: &DispersionRelation, k: [&[f64]; 3], sigma: i8) -> Result<f64> {
    if sigma.abs() != 1 {
        return Err(Error::InvalidInput(format!("σ = {sigma} must be ±1")));
    }
    if k.iter().any(|v| v.len() != dispersion.d) {
        return Err(Error::InvalidInput("momenta must have the lattice dimension".into()));
    }
    let sum: Vec<f64> = (0..dispersion.d).map(|i| k[0][i] + k[1][i] + k[2][i]).collect();
    let w = |v: &[f64]| dispersion.omega(v);
    Ok(w(k[2])? - w(k[0])? + sigma as f64 * (w(k[1])? - w(&sum)?))
}

/// Expansion parameters derived from the dispersion-bound exponent `δ` and
/// the crossing-bound exponent `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    pub b: f64,
    pub gamma_prime: f64,
    pub a0: f64,
    pub b0: f64,
}

impl ExpansionParams {
    /// `b = 3/4`, `γ′ = min(1/4, 2γ, 2δ)`, `a₀ = γ′/24`, `b₀ = 16(3 + 1/a₀)`.
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0) || !(delta > 0.0) {
            return Err(Error::InvalidInput("γ and δ must be positive".into()));
        }
        let gamma_prime = 0.25f64.min(2.0 * gamma).min(2.0 * delta);
        let a0 = gamma_prime / 24.0;
        Ok(Self { b: 0.75, gamma_prime, a0, b0: 16.0 * (3.0 + 1.0 / a0) })
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidInput(format!("λ = {lambda} must lie in (0, 1)")));
        }
        Ok(())
    }

    /// The time regulator `ε = λ²`.
    pub fn epsilon(lambda: f64) -> Result<f64> {
        Self::check_lambda(lambda)?;
        Ok(lambda * lambda)
    }

    /// `N₀(λ) = max(1, ⌊a₀|ln λ| / ln⟨ln λ⟩⌋)` with `⟨x⟩ = √(1+x²)`.
    pub fn n0(&self, lambda: f64) -> Result<u64> {
        Self::check_lambda(lambda)?;
        let l = lambda.ln().abs();
        Ok(((self.a0 * l / japanese(l).ln()).floor() as u64).max(1))
    }

    /// `κ′(λ) = λ² N₀^{b₀}`.
    pub fn kappa_prime(&self, lambda: f64) -> Result<f64> {
        let n0 = self.n0(lambda)? as f64;
        Ok(lambda * lambda * n0.powf(self.b0))
    }

    /// `κ_n(λ)`: zero for `n < N₀/2`, `κ′` for `N₀/2 ≤ n ≤ N₀`.
    pub fn kappa(&self, n: u64, lambda: f64) -> Result<f64> {
        let n0 = self.n0(lambda)?;
        if n > n0 {
            return Err(Error::InvalidInput(format!("n = {n} exceeds N₀ = {n0}")));
        }
        if 2 * n < n0 {
            Ok(0.0)
        } else {
            self.kappa_prime(lambda)
        }
    }
}
