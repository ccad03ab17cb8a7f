//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use wkin::dispersion::DispersionRelation;
use wkin::dynamics::{conservation_report, evolve, write_conservation_csv, ConservationRecord, IntegratorConfig};
use wkin::gibbs::{estimate_r0, estimate_w_lambda, hamiltonian, particle_number, r0_first_order, EnsembleStats, GibbsParams};
use wkin::graphs::classify::{classify_spec, count_leading, for_each_graph_spec, CountScope, GraphKind, PartitionSet};
use wkin::graphs::dump::dump_graph;
use wkin::graphs::enumerate::{history_count, ClusterPartition, Interlacing};
use wkin::graphs::momentum::GraphSpec;
use wkin::graphs::simplex::{verify_interlacing_identity, verify_resolvent_identity, ContourConfig};
use wkin::harness::fit::gnuplot_script;
use wkin::harness::runner::{initial_field, stream_seed};
use wkin::harness::{compute_q, estimate_f2_all, fit_decay, predicted_rates, run_ensemble, ExperimentConfig, SeedManifest};
use wkin::kinetics::{omega_ren, HomogeneousState, KineticKernel, QuadratureConfig};
use wkin::lattice::save_snapshot;
use wkin::{Error, Result};

use crate::{Cli, Command, CompareArgs, CovarianceArgs, EvolveArgs, GraphsArgs, PredictArgs, SampleArgs, Scope, VerifyDrArgs};

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Sample(a) => sample(cli, a),
        Command::Evolve(a) => evolve_cmd(cli, a),
        Command::Covariance(a) => covariance(cli, a),
        Command::Predict(a) => predict(cli, a),
        Command::VerifyDr(a) => verify_dr(cli, a),
        Command::Graphs(a) => graphs(a),
        Command::Compare(a) => compare(cli, a),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("this subcommand needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_path(cli: &Cli, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cli.out)?;
    Ok(cli.out.join(name))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn lambda_at(cfg: &ExperimentConfig, index: usize) -> Result<f64> {
    cfg.lambdas.get(index).copied().ok_or_else(|| Error::InvalidInput(format!("no coupling with index {index}")))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::InvalidInput(format!("cannot parse {what} entry {s:?}"))))
        .collect()
}

fn sample(cli: &Cli, a: &SampleArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let lambda = lambda_at(&cfg, a.lambda_index)?;
    let model = cfg.model(lambda)?;
    let count = a.count.unwrap_or(cfg.realizations);
    let seed = stream_seed(cfg.seed, a.lambda_index);
    let metropolis = cfg.gibbs.metropolis;
    let parts: Vec<Result<EnsembleStats>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let field = initial_field(&model, metropolis, seed, i as u64)?;
            if i < a.snapshots {
                save_snapshot(&out_path(cli, &format!("sample_{i}.wkin"))?, &field)?;
            }
            let mut s = EnsembleStats::new(model.lattice, 1);
            s.push(&field, &model);
            Ok(s)
        })
        .collect();
    let mut stats = EnsembleStats::new(model.lattice, cfg.batch_size);
    for p in parts {
        stats.merge(&p?);
    }
    let w = estimate_w_lambda(&stats, &model);
    let mut csv = BufWriter::new(File::create(out_path(cli, "sample_w.csv")?)?);
    let d = model.lattice.d();
    let header: Vec<String> = (1..=d).map(|i| format!("k{i}")).chain(["w_hat", "stderr", "w"].map(String::from)).collect();
    writeln!(csv, "{}", header.join(","))?;
    for (k, (e, exact)) in w.values.iter().zip(model.covariance()).enumerate() {
        let coords: Vec<String> = model.lattice.momentum(k).iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{},{},{},{}", coords.join(","), e.value, e.stderr, exact)?;
    }
    csv.flush()?;
    let r0 = estimate_r0(&stats);
    let summary = serde_json::json!({
        "lambda": lambda,
        "count": stats.count(),
        "r0": r0,
        "r0_first_order": r0_first_order(&model),
        "energy": stats.energy(),
        "particle_number": stats.particle_number(),
        "max_covariance_deviation": w.max_deviation,
    });
    write_json(&out_path(cli, "sample_summary.json")?, &summary)?;
    println!("draws {} R0 {:.6} ± {:.6} (first order {:.6}) max |Ŵ − W| {:.3e}", stats.count(), r0.value, r0.stderr, r0_first_order(&model), w.max_deviation);
    Ok(())
}

fn evolve_cmd(cli: &Cli, a: &EvolveArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let lambda = lambda_at(&cfg, a.lambda_index)?;
    let model = cfg.model(lambda)?;
    let field = initial_field(&model, cfg.gibbs.metropolis, stream_seed(cfg.seed, a.lambda_index), a.realization)?;
    let mut times: Vec<f64> = cfg.micro_times(lambda).iter().map(|t| t.abs()).filter(|t| *t > 0.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.is_empty() {
        return Err(Error::Config("evolve needs at least one nonzero record time".into()));
    }
    let traj = evolve(&field, &IntegratorConfig::new(cfg.dt(lambda)?, times)?, &model)?;
    let mut log = vec![ConservationRecord { t: 0.0, n: particle_number(&field), h: hamiltonian(&field, &model)? }];
    log.extend(traj.log.iter().copied());
    write_conservation_csv(&out_path(cli, "conservation.csv")?, &log)?;
    if let Some(last) = traj.snapshots.last() {
        save_snapshot(&out_path(cli, "final.wkin")?, last)?;
    }
    let report = conservation_report(&log)?;
    println!("records {} max N drift {:.3e} max H drift {:.3e}", log.len(), report.max_n_drift, report.max_h_drift);
    Ok(())
}

fn covariance(cli: &Cli, a: &CovarianceArgs) -> Result<()> {
    let mut cfg = load_config(cli)?;
    let lambda = lambda_at(&cfg, a.lambda_index)?;
    if a.all_modes || a.q {
        let lat = cfg.lattice_config()?;
        cfg.modes = (0..lat.volume()).map(|i| lat.momentum(i)).collect();
    }
    let ens = run_ensemble(&cfg, a.lambda_index)?;
    let series = estimate_f2_all(&ens, a.batch)?;
    let name = format!("covariance_{}.csv", a.lambda_index);
    series.write_csv(BufWriter::new(File::create(out_path(cli, &name)?)?))?;
    write_json(&out_path(cli, "manifest.json")?, &SeedManifest::new(&cfg)?)?;
    println!("λ = {lambda}: {} modes × {} times from {} realizations, R0 {:.6} ± {:.6}", series.k.len(), series.t.len(), series.n_real, series.r0, series.r0_stderr);
    if a.q {
        let delta = vec![(vec![0i64; cfg.lattice.d], Complex64::new(1.0, 0.0))];
        let mut w = BufWriter::new(File::create(out_path(cli, &format!("q_{}.csv", a.lambda_index))?)?);
        writeln!(w, "t,spectral_re,spectral_im,direct_re,direct_im,stderr")?;
        for (&tau, &t) in cfg.times.iter().zip(&ens.times) {
            let q = compute_q(&delta, &delta, t, &ens)?;
            writeln!(w, "{tau},{},{},{},{},{}", q.spectral.re, q.spectral.im, q.direct.re, q.direct.im, q.stderr)?;
            println!("Q(δ0, δ0; t = {tau}) spectral {:.6} direct {:.6}", q.spectral, q.direct);
        }
        w.flush()?;
    }
    Ok(())
}

fn kinetic_kernel(cli: &Cli, a: &PredictArgs, d_hint: Option<usize>) -> Result<KineticKernel> {
    let cfg = match &cli.config {
        Some(_) => Some(load_config(cli)?),
        None => None,
    };
    let d = match (&cfg, d_hint.or(a.d)) {
        (Some(c), _) => c.lattice.d,
        (None, Some(d)) => d,
        (None, None) => return Err(Error::InvalidInput("give --k, --d or --config to fix the dimension".into())),
    };
    let disp = match &cfg {
        Some(c) => c.dispersion()?,
        None => DispersionRelation::nearest_neighbor(d, d as f64),
    };
    let beta = a.beta.or(cfg.as_ref().map(|c| c.gibbs.beta)).unwrap_or(1.0);
    let mu = a.mu.or(cfg.as_ref().map(|c| c.gibbs.mu)).unwrap_or(-1.0);
    let mut quad = cfg.map(|c| c.quadrature).unwrap_or_else(QuadratureConfig::default);
    if let Some(m) = a.m {
        quad.m = m;
    }
    if let Some(t) = a.t_max {
        quad.t_max = t;
    }
    KineticKernel::new(&disp, GibbsParams::new(beta, mu, 0.0, &disp)?, quad)
}

fn predict(cli: &Cli, a: &PredictArgs) -> Result<()> {
    if !(a.gamma || a.omega_ren || a.solve) {
        return Err(Error::InvalidInput("choose --gamma, --omega-ren or --solve".into()));
    }
    let ks: Vec<Vec<f64>> = a.k.iter().map(|s| parse_list(s, "momentum")).collect::<Result<_>>()?;
    if (a.gamma || a.omega_ren) && ks.is_empty() {
        return Err(Error::InvalidInput("--gamma and --omega-ren need at least one --k".into()));
    }
    if ks.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(Error::InvalidInput("all momenta must have the same dimension".into()));
    }
    let kk = kinetic_kernel(cli, a, ks.first().map(|k| k.len()))?;
    let d = kk.lattice().d();
    if ks.iter().any(|k| k.len() != d) {
        return Err(Error::InvalidInput(format!("momenta must have {d} components")));
    }
    if a.gamma || a.omega_ren {
        let rate = kk.rate_table()?;
        let rows: Vec<usize> = ks.iter().map(|k| rate.index_of(k)).collect::<Result<_>>()?;
        if a.gamma {
            rate.select(&rows).write_csv(io::stdout().lock())?;
        }
        if a.omega_ren {
            let lambda = a.lambda.ok_or_else(|| Error::InvalidInput("--omega-ren needs --lambda".into()))?;
            let r0 = a.r0.ok_or_else(|| Error::InvalidInput("--omega-ren needs --r0".into()))?;
            let disp = DispersionRelation::nearest_neighbor(d, d as f64);
            let header: Vec<String> = (1..=d).map(|i| format!("k{i}")).chain(["omega", "omega_ren"].map(String::from)).collect();
            println!("{}", header.join(","));
            for (k, &i) in ks.iter().zip(&rows) {
                let coords: Vec<String> = k.iter().map(|v| v.to_string()).collect();
                println!("{},{},{}", coords.join(","), disp.omega(k)?, omega_ren(&disp, k, lambda, r0, rate.gamma2[i])?);
            }
        }
    }
    if a.solve {
        let lat = kk.lattice();
        let h: Vec<f64> = (0..lat.volume())
            .map(|i| kk.covariance()[i] * (1.0 + 0.2 * (2.0 * std::f64::consts::PI * lat.momentum(i)[0]).cos()))
            .collect();
        let h0 = HomogeneousState::new(d, kk.config().m, h, 0.0)?;
        let h1 = kk.solve_kinetic(&h0, a.t_end, a.step)?;
        let om = kk.omega();
        write_json(&out_path(cli, "kinetic_state.json")?, &h1)?;
        println!("t {} mass {:.8} -> {:.8} energy {:.8} -> {:.8}", h1.t, h0.mass(), h1.mass(), h0.energy(om), h1.energy(om));
    }
    Ok(())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidInput("need 0 < t-min < t-max and at least two points".into()));
    }
    Ok((0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect())
}

fn verify_dr(cli: &Cli, a: &VerifyDrArgs) -> Result<()> {
    if !(a.dr2 || a.dr3) {
        return Err(Error::InvalidInput("choose --dr2 or --dr3".into()));
    }
    let disp = DispersionRelation::nearest_neighbor(a.d, a.d as f64);
    let grid = log_grid(a.t_min, a.t_max, a.points)?;
    if a.dr2 {
        let rep = disp.verify_dr2(&grid, a.m)?;
        write_json(&out_path(cli, &format!("dr2_d{}.json", a.d))?, &rep)?;
        let floor = 3.0 * a.d as f64 / 7.0;
        println!("d {} exponent {:.4} ± {:.4} constant {:.4} (reference 3d/7 = {floor:.4})", a.d, rep.exponent, rep.exponent_err, rep.constant);
    }
    if a.dr3 {
        let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
        let ks: Vec<Vec<f64>> = (0..8).map(|_| (0..a.d).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
        let rep = disp.verify_dr3(&grid, &ks, a.sigma)?;
        write_json(&out_path(cli, &format!("dr3_d{}.json", a.d))?, &rep)?;
        println!("d {} sigma {} constant {:.4} over {} samples", a.d, a.sigma, rep.constant, rep.samples.len());
    }
    Ok(())
}

fn scope(s: Scope) -> CountScope {
    match s {
        Scope::Main => CountScope::MainTerm,
        Scope::All => CountScope::AllSplits,
    }
}

fn parse_partition(text: &str) -> Result<ClusterPartition> {
    let blocks = text.split(',').map(|b| parse_list::<usize>(&b.replace('-', ","), "partition")).collect::<Result<Vec<_>>>()?;
    ClusterPartition::new(blocks)
}

fn parse_interlacing(text: &str) -> Result<Interlacing> {
    let j = text
        .chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => Err(Error::InvalidInput(format!("interlacing symbol {other:?} is not + or -"))),
        })
        .collect::<Result<Vec<i8>>>()?;
    Interlacing::new(j)
}

fn graphs(a: &GraphsArgs) -> Result<()> {
    let mut did = false;
    if let Some(n) = a.count_histories {
        println!("{}", history_count(n, 1));
        did = true;
    }
    if let Some(n) = a.count_leading {
        let c = count_leading(n, scope(a.scope))?;
        println!("N {} leading {} bound {} examined {} classified {}", c.n, c.leading, c.bound, c.examined, c.classified);
        did = true;
    }
    if let Some(n) = a.classify {
        let mut hist: BTreeMap<&'static str, u64> = BTreeMap::new();
        for_each_graph_spec(n, scope(a.scope), PartitionSet::OppositePairings, |spec| {
            let (_, class) = classify_spec(&spec)?;
            *hist.entry(class.kind.as_str()).or_default() += 1;
            Ok(())
        })?;
        for kind in [GraphKind::Irrelevant, GraphKind::HigherOrder, GraphKind::PartiallyPaired, GraphKind::Leading, GraphKind::Nested, GraphKind::Crossing] {
            println!("{} {}", kind.as_str(), hist.get(kind.as_str()).copied().unwrap_or(0));
        }
        did = true;
    }
    if a.dump {
        let ell: Vec<usize> = parse_list(a.ell.as_deref().unwrap_or(""), "history")?;
        let ell_minus: Vec<usize> = parse_list(a.ell_minus.as_deref().unwrap_or(""), "history")?;
        let partition = parse_partition(a.partition.as_deref().ok_or_else(|| Error::InvalidInput("--dump needs --partition".into()))?)?;
        let j = match &a.interlacing {
            Some(s) => parse_interlacing(s)?,
            None if ell_minus.is_empty() => Interlacing::all_plus(ell.len()),
            None => return Err(Error::InvalidInput("--ell-minus needs --interlacing".into())),
        };
        let spec = GraphSpec::new(partition, j, ell, ell_minus)?;
        let (r, class) = classify_spec(&spec)?;
        print!("{}", dump_graph(&r, &class));
        did = true;
    }
    if a.verify_identities {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut draw = |k: usize| -> Vec<Complex64> {
            (0..k).map(|_| Complex64::new(rng.random_range(-2.0..2.0), -rng.random_range(0.0..1.0))).collect()
        };
        let mut inter: f64 = 0.0;
        for n in 0..=3 {
            for nm in 0..=3 {
                let (gp, gm) = (draw(n + 1), draw(nm + 1));
                inter = inter.max(verify_interlacing_identity(&gp, &gm, 1.5)?);
            }
        }
        let mut res: f64 = 0.0;
        for size in 1..=3usize {
            let g = draw(size);
            for mask in 1..(1u32 << size) {
                let sub: Vec<usize> = (0..size).filter(|i| mask & (1 << i) != 0).collect();
                res = res.max(verify_resolvent_identity(&g, &sub, 1.5, ContourConfig::default())?);
            }
        }
        println!("interlacing residual {inter:.3e} resolvent residual {res:.3e}");
        did = true;
    }
    if !did {
        return Err(Error::InvalidInput("choose one of --count-histories, --count-leading, --classify, --dump, --verify-identities".into()));
    }
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let lambda = lambda_at(&cfg, a.lambda_index)?;
    let ens = run_ensemble(&cfg, a.lambda_index)?;
    let series = estimate_f2_all(&ens, cfg.batch_size)?;
    let kk = KineticKernel::new(&cfg.dispersion()?, cfg.model(0.0)?.params, cfg.quadrature.clone())?;
    let rate = kk.rate_table()?;
    let report = fit_decay(&series, &predicted_rates(&rate, &series.k));
    let csv_name = format!("covariance_{}.csv", a.lambda_index);
    series.write_csv(BufWriter::new(File::create(out_path(cli, &csv_name)?)?))?;
    fs::write(out_path(cli, &format!("covariance_{}.gp", a.lambda_index))?, gnuplot_script(&series, &csv_name))?;
    write_json(&out_path(cli, &format!("comparison_{}.json", a.lambda_index))?, &report)?;
    write_json(&out_path(cli, "manifest.json")?, &SeedManifest::new(&cfg)?)?;
    println!("λ = {lambda}, {} realizations", report.n_real);
    for m in &report.modes {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        if m.fit {
            println!("k {:?} Γ1 fit {:.4} ± {:.4} predicted {} ratio {}", m.k, m.gamma1_fit, m.gamma1_err, fmt(m.gamma1_pred), fmt(m.ratio));
        } else {
            println!("k {:?} unfit ({} usable points)", m.k, m.points);
        }
    }
    Ok(())
}
