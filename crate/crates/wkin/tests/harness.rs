use num_complex::Complex64;

use wkin::harness::covariance::estimate_f2;
use wkin::harness::runner::run_ensemble;
use wkin::harness::{compute_q, estimate_f2_all, fit_decay, ExperimentConfig};
use wkin::lattice::LatticeConfig;

fn config(lambda: f64, l: usize, times: &[f64], realizations: usize, all_modes: bool) -> ExperimentConfig {
    let lat = LatticeConfig::new(2, l).unwrap();
    let modes: Vec<Vec<f64>> =
        if all_modes { (0..lat.volume()).map(|i| lat.momentum(i)).collect() } else { vec![vec![0.0, 0.0], vec![1.0 / l as f64, 0.0], vec![2.0 / l as f64, 1.0 / l as f64]] };
    let text = format!(
        "lambdas = [{lambda:?}]\ntimes = {times:?}\nmodes = {modes:?}\nrealizations = {realizations}\nseed = 17\n\
         [lattice]\nd = 2\nL = {l}\n[gibbs]\nbeta = 1.0\nmu = -1.0\n[gibbs.metropolis]\nburn_in = 200\nthin = 10\n\
         target_acceptance = 0.4\nacceptance_band = [0.2, 0.7]\npilot_sweeps = 50\n[integrator]\ndt = 0.01\n"
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn free_evolution_keeps_the_phase_removed_covariance_constant() {
    let cfg = config(0.0, 8, &[0.0, 0.5, 1.0, 2.0], 4, true);
    let ens = run_ensemble(&cfg, 0).unwrap();
    let omega = ens.model.omega();
    for real in &ens.realizations {
        for (r, &t) in ens.times.iter().enumerate() {
            for (j, &k) in ens.modes.iter().enumerate() {
                let a = real.initial[j];
                let z = a.conj() * real.values[r][j] * Complex64::from_polar(1.0, omega[k] * t);
                assert!((z - a.norm_sqr()).norm() <= 1e-10 * a.norm_sqr().max(1e-300), "mode {k}, t {t}");
            }
        }
    }
    let s = estimate_f2_all(&ens, 1).unwrap();
    let w = ens.model.covariance();
    for (i, &k) in ens.modes.iter().enumerate() {
        let v0 = s.value[i][0];
        assert_eq!(v0.im, 0.0);
        for r in 1..s.t.len() {
            assert!((s.value[i][r] - v0).norm() <= 1e-10 * v0.norm());
        }
        // With four draws the estimate only has to be of the right size.
        assert!(v0.re > 0.0 && v0.re < 20.0 * w[k]);
    }
}

#[test]
fn equal_time_value_is_the_covariance_estimate() {
    let cfg = config(0.5, 6, &[0.0, 0.5], 16, false);
    let ens = run_ensemble(&cfg, 0).unwrap();
    let s = estimate_f2_all(&ens, 1).unwrap();
    let vol = ens.model.volume() as f64;
    for (j, _) in ens.modes.iter().enumerate() {
        let direct: f64 = ens.realizations.iter().map(|r| r.initial[j].norm_sqr() / vol).sum::<f64>() / 16.0;
        assert!((s.value[j][0].re - direct).abs() < 1e-12 * direct);
        assert!(s.value[j][0].im.abs() < 1e-12 * direct);
    }
    assert!(ens.r0.value > 0.0 && ens.r0.stderr > 0.0);
    assert!((ens.r0.value - ens.r0_analytic).abs() < 0.3 * ens.r0_analytic);
}

#[test]
fn negative_times_give_the_conjugate_estimate() {
    let cfg = config(0.5, 6, &[-0.5, 0.5], 64, false);
    let ens = run_ensemble(&cfg, 0).unwrap();
    let s = estimate_f2_all(&ens, 1).unwrap();
    for i in 0..s.k.len() {
        let d = s.value[i][0] - s.value[i][1].conj();
        let sig = (s.stderr(i, 0).powi(2) + s.stderr(i, 1).powi(2)).sqrt();
        assert!(d.norm() <= 5.0 * sig, "mode {i}: {d} vs {sig}");
    }
}

#[test]
fn quadratic_form_routes_agree_and_respect_time_reversal() {
    let cfg = config(0.5, 6, &[-0.25, 0.0, 0.25], 24, true);
    let ens = run_ensemble(&cfg, 0).unwrap();
    let f = vec![(vec![0i64, 0], Complex64::new(1.0, 0.0)), (vec![1, 0], Complex64::new(0.0, 0.5))];
    let g = vec![(vec![0i64, 1], Complex64::new(0.7, -0.2)), (vec![-1, -1], Complex64::new(0.3, 0.0))];
    for &t in &[-1.0, 0.0, 1.0] {
        let q = compute_q(&g, &f, t, &ens).unwrap();
        assert!((q.spectral - q.direct).norm() <= 1e-10 * q.direct.norm().max(1e-12), "{q:?}");
    }
    let fwd = compute_q(&f, &g, 1.0, &ens).unwrap();
    let back = compute_q(&g, &f, -1.0, &ens).unwrap();
    let d = back.direct.conj() - fwd.direct;
    assert!(d.norm() <= 5.0 * (fwd.stderr.powi(2) + back.stderr.powi(2)).sqrt(), "{d}");

    let delta = vec![(vec![0i64, 0], Complex64::new(1.0, 0.0))];
    let q = compute_q(&delta, &delta, 1.0, &ens).unwrap();
    let s = estimate_f2_all(&ens, 1).unwrap();
    let avg: Complex64 = s.value.iter().map(|v| v[2]).sum::<Complex64>() / s.value.len() as f64;
    assert!((q.spectral - avg).norm() < 1e-12);

    let wide = vec![(vec![3i64, 0], Complex64::new(1.0, 0.0))];
    assert!(compute_q(&wide, &delta, 0.0, &ens).is_err());
    assert!(compute_q(&delta, &delta, 0.5, &ens).is_err());
}

#[test]
fn standard_errors_shrink_with_the_square_root_of_the_ensemble() {
    let small = run_ensemble(&config(0.0, 8, &[0.0, 1.0], 100, false), 0).unwrap();
    let large = run_ensemble(&config(0.0, 8, &[0.0, 1.0], 400, false), 0).unwrap();
    let a = estimate_f2_all(&small, 1).unwrap();
    let b = estimate_f2_all(&large, 1).unwrap();
    let mut ratios = Vec::new();
    for i in 0..a.k.len() {
        ratios.push(a.stderr_re[i][1] / b.stderr_re[i][1]);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 2.0).abs() < 0.4, "{ratios:?}");
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let cfg = config(0.5, 6, &[0.0, 0.25], 6, false);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_ensemble(&cfg, 0).unwrap());
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run_ensemble(&cfg, 0).unwrap());
    assert_eq!(one.realizations, three.realizations);
    assert_eq!(one.r0, three.r0);
}

#[test]
fn mismatched_ensembles_are_rejected() {
    let mut a = run_ensemble(&config(0.0, 6, &[0.0, 1.0], 4, false), 0).unwrap();
    let b = run_ensemble(&config(0.0, 6, &[0.0, 2.0], 4, false), 0).unwrap();
    assert!(a.merge(b).is_err());
    let c = run_ensemble(&config(0.0, 6, &[0.0, 1.0], 4, false), 0).unwrap();
    a.merge(c).unwrap();
    assert_eq!(a.realizations.len(), 8);
    assert!(estimate_f2(&a, &[a.modes[0]], &[3.0], 1).is_err());
    a.realizations[1].values.pop();
    assert!(estimate_f2_all(&a, 1).is_err());
}

#[test]
fn zero_coupling_series_fits_a_vanishing_rate() {
    let cfg = config(0.0, 8, &[0.0, 0.5, 1.0, 1.5, 2.0], 50, false);
    let ens = run_ensemble(&cfg, 0).unwrap();
    let report = fit_decay(&estimate_f2_all(&ens, 1).unwrap(), &[None, None, None]);
    for m in &report.modes {
        assert!(m.fit);
        assert!(m.gamma1_fit.abs() < 1e-9, "{m:?}");
    }
}
