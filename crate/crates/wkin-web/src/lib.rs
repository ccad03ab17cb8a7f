//! Browser bindings: dispersive decay of the free propagator, the kinetic
//! decay rate along a path in the Brillouin zone, and split-step evolution
//! of a two-dimensional lattice field.  Each entry point returns JSON.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use wkin::dispersion::DispersionRelation;
use wkin::dynamics::{evolve, IntegratorConfig};
use wkin::gibbs::{hamiltonian, particle_number, realization_rng, sample_gaussian, GibbsParams, LatticeModel};
use wkin::kinetics::{KineticKernel, QuadratureConfig};
use wkin::lattice::LatticeConfig;
use wkin::{Error, Result};

/// Largest propagator grid accepted from the page.
pub const MAX_PROPAGATOR_GRID: usize = 256;
/// Largest rate grid per dimension accepted from the page.
pub const MAX_RATE_CELLS: usize = 16 * 16 * 16;
/// Largest lattice side and step count of the evolution demo.
pub const MAX_SIDE: usize = 64;
pub const MAX_STEPS: usize = 20_000;

fn guard(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Guard(what.into()))
    }
}

/// `‖p_t‖₃³` on a logarithmic time grid with its fitted decay exponent.
pub fn decay_report(d: usize, m: usize, t_min: f64, t_max: f64, points: usize) -> Result<Value> {
    guard(m <= MAX_PROPAGATOR_GRID, "propagator grid too large for the page")?;
    if !(t_min > 0.0 && t_max > t_min) || !(4..=64).contains(&points) {
        return Err(Error::InvalidInput("need 0 < t_min < t_max and 4 to 64 points".into()));
    }
    let grid: Vec<f64> = (0..points).map(|i| t_min * (t_max / t_min).powf(i as f64 / (points - 1) as f64)).collect();
    let rep = DispersionRelation::nearest_neighbor(d, d as f64).verify_dr2(&grid, m)?;
    Ok(json!({
        "d": d,
        "t": rep.samples.iter().map(|s| s.t).collect::<Vec<_>>(),
        "value": rep.samples.iter().map(|s| s.value).collect::<Vec<_>>(),
        "exponent": rep.exponent,
        "exponent_err": rep.exponent_err,
        "constant": rep.constant,
        "reference": 3.0 * d as f64 / 7.0,
    }))
}

/// `Γ(k)` along the axis `(s, 0, …)` and the diagonal `(s, …, s)` for
/// `s ∈ [0, 1/2]` on an `M^d` grid at inverse temperature `beta` and
/// chemical potential `mu`.
pub fn rate_profile(d: usize, m: usize, beta: f64, mu: f64) -> Result<Value> {
    guard(m.checked_pow(d as u32).is_some_and(|c| c <= MAX_RATE_CELLS), "rate grid too large for the page")?;
    let disp = DispersionRelation::nearest_neighbor(d, d as f64);
    let params = GibbsParams::new(beta, mu, 0.0, &disp)?;
    let cfg = QuadratureConfig {
        m,
        t_max: 40.0,
        dt: 0.1,
        epsilon_ladder: vec![0.4, 0.3, 0.2],
        beta_ladder: vec![0.4, 0.3, 0.2],
        ..QuadratureConfig::default()
    };
    let rate = KineticKernel::new(&disp, params, cfg)?.rate_table()?;
    let path = |diagonal: bool| -> Result<Value> {
        let mut s = Vec::new();
        let mut g1 = Vec::new();
        let mut g1t = Vec::new();
        let mut g2 = Vec::new();
        for j in 0..=m / 2 {
            let x = j as f64 / m as f64;
            let k: Vec<f64> = (0..d).map(|i| if diagonal || i == 0 { x } else { 0.0 }).collect();
            let i = rate.index_of(&k)?;
            s.push(x);
            g1.push(rate.gamma1[i]);
            g1t.push(rate.gamma1_time[i]);
            g2.push(rate.gamma2[i]);
        }
        Ok(json!({ "s": s, "gamma1": g1, "gamma1_time": g1t, "gamma2": g2 }))
    };
    Ok(json!({ "d": d, "M": m, "axis": path(false)?, "diagonal": path(true)? }))
}

/// Evolves a Gaussian draw on the `l × l` lattice and records `frames`
/// equally spaced snapshots of `|ψ(x)|²` with the conserved quantities.
pub fn evolve_field(l: usize, lambda: f64, dt: f64, steps: usize, frames: usize, seed: u64) -> Result<Value> {
    guard(l <= MAX_SIDE && steps <= MAX_STEPS, "lattice or step count too large for the page")?;
    if frames == 0 || frames > steps {
        return Err(Error::InvalidInput("need 1 ≤ frames ≤ steps".into()));
    }
    let disp = DispersionRelation::nearest_neighbor(2, 2.0);
    let params = GibbsParams::new(1.0, -1.0, lambda, &disp)?;
    let model = LatticeModel::new(LatticeConfig::new(2, l)?, disp, params)?;
    let field = sample_gaussian(&model, &mut realization_rng(seed, 0));
    let per_frame = steps / frames;
    let times: Vec<f64> = (1..=frames).map(|f| (f * per_frame) as f64 * dt).collect();
    let traj = evolve(&field, &IntegratorConfig::new(dt, times)?, &model)?;
    let density = |s: &wkin::lattice::FieldState| -> Vec<f64> { s.to_site().values.iter().map(|v| v.norm_sqr()).collect() };
    let mut snapshots = vec![density(&field)];
    snapshots.extend(traj.snapshots.iter().map(density));
    let mut t = vec![0.0];
    let mut n = vec![particle_number(&field)];
    let mut h = vec![hamiltonian(&field, &model)?];
    for r in &traj.log {
        t.push(r.t);
        n.push(r.n);
        h.push(r.h);
    }
    Ok(json!({ "L": l, "t": t, "N": n, "H": h, "density": snapshots }))
}

fn to_js(v: Result<Value>) -> std::result::Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = decayReport)]
pub fn decay_report_js(d: usize, m: usize, t_min: f64, t_max: f64, points: usize) -> std::result::Result<String, JsError> {
    to_js(decay_report(d, m, t_min, t_max, points))
}

#[wasm_bindgen(js_name = rateProfile)]
pub fn rate_profile_js(d: usize, m: usize, beta: f64, mu: f64) -> std::result::Result<String, JsError> {
    to_js(rate_profile(d, m, beta, mu))
}

#[wasm_bindgen(js_name = evolveField)]
pub fn evolve_field_js(l: usize, lambda: f64, dt: f64, steps: usize, frames: usize, seed: u64) -> std::result::Result<String, JsError> {
    to_js(evolve_field(l, lambda, dt, steps, frames, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_exponent_exceeds_the_reference() {
        let v = decay_report(3, 64, 5.0, 100.0, 12).unwrap();
        assert!(v["exponent"].as_f64().unwrap() >= 9.0 / 7.0 - 0.05);
        assert_eq!(v["t"].as_array().unwrap().len(), 12);
        assert!(decay_report(3, 1024, 5.0, 100.0, 12).is_err());
        assert!(decay_report(3, 64, 5.0, 1.0, 12).is_err());
    }

    #[test]
    fn rate_profile_is_nonnegative_and_consistent() {
        let v = rate_profile(2, 8, 1.0, -1.0).unwrap();
        let axis = &v["axis"];
        let g1 = axis["gamma1"].as_array().unwrap();
        assert_eq!(g1.len(), 5);
        assert!(g1.iter().all(|g| g.as_f64().unwrap() >= 0.0));
        assert_eq!(v["axis"]["gamma1"][0], v["diagonal"]["gamma1"][0]);
        assert!(rate_profile(3, 32, 1.0, -1.0).is_err());
    }

    #[test]
    fn evolution_conserves_particle_number() {
        let v = evolve_field(8, 0.5, 0.05, 200, 4, 1).unwrap();
        let n: Vec<f64> = v["N"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(n.len(), 5);
        assert!(n.iter().all(|x| (x - n[0]).abs() < 1e-10 * n[0]));
        assert_eq!(v["density"][0].as_array().unwrap().len(), 64);
        assert!(evolve_field(8, 0.5, 0.05, 200, 0, 1).is_err());
    }
}
