use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
lambdas = [0.5]
times = [0.0, 0.25, 0.5, 0.75, 1.0]
modes = [[0.0, 0.0], [0.16666666666666666, 0.0]]
realizations = 8
seed = 5
[lattice]
d = 2
L = 6
[gibbs]
beta = 1.0
mu = -1.0
[gibbs.metropolis]
burn_in = 100
thin = 10
target_acceptance = 0.4
acceptance_band = [0.2, 0.7]
pilot_sweeps = 50
[quadrature]
M = 6
t_max = 20.0
dt = 0.1
epsilon_ladder = [0.8, 0.6, 0.4]
beta_ladder = [0.8, 0.6, 0.4]
tolerance = 0.02
singular_radius = 0.05
"#;

fn wkin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wkin")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn counts_histories() {
    let o = wkin(&["graphs", "--count-histories", "4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "105");
}

#[test]
fn predicts_a_nonnegative_rate_row() {
    let o = wkin(&["predict", "--gamma", "--k", "0.25,0,0", "--m", "16", "--t-max", "40"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    let col = header.iter().position(|h| *h == "gamma1").unwrap();
    assert!(row[col].parse::<f64>().unwrap() >= 0.0);
    assert_eq!(&row[..3], &["0.25", "0", "0"]);
}

#[test]
fn reports_the_decay_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = wkin(&["--out", out, "verify-dr", "--dr2", "--d", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let exponent: f64 = text.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(exponent >= 9.0 / 7.0 - 0.05, "{text}");
    assert!(dir.path().join("dr2_d3.json").exists());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wkin(&["sample"]).status.code(), Some(1));
    assert_eq!(wkin(&["no-such-command"]).status.code(), Some(1));
    let bad = write_config(dir.path(), &CONFIG.replace("L = 6", "L = 6\nbogus = 1"));
    assert_eq!(wkin(&["--config", &bad, "sample"]).status.code(), Some(1));
    let unmixed = write_config(dir.path(), &CONFIG.replace("thin = 10", "thin = 1"));
    assert_eq!(wkin(&["--config", &unmixed, "sample"]).status.code(), Some(2));
    assert_eq!(wkin(&["graphs", "--count-leading", "12"]).status.code(), Some(3));
    assert_eq!(wkin(&["--help"]).status.code(), Some(0));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = dir.path().join(name);
        let o = wkin(&["--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap(), "covariance", "--q"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((std::fs::read(out.join("covariance_0.csv")).unwrap(), std::fs::read(out.join("q_0.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let reseeded = dir.path().join("d");
    wkin(&["--config", &cfg, "--seed", "6", "--out", reseeded.to_str().unwrap(), "covariance", "--q"]);
    assert_ne!(std::fs::read(reseeded.join("covariance_0.csv")).unwrap(), outputs[0].0);

    let q = String::from_utf8(outputs[0].1.clone()).unwrap();
    for line in q.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[3]).abs() <= 1e-10 * v[3].abs().max(1e-12) && (v[2] - v[4]).abs() <= 1e-10 * v[3].abs().max(1e-12));
    }
}

#[test]
fn pipeline_commands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    for args in [vec!["sample", "--snapshots", "1"], vec!["evolve"], vec!["compare"]] {
        let mut full = vec!["--config", &cfg, "--out", out_s];
        full.extend(args);
        let o = wkin(&full);
        assert!(o.status.success(), "{full:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["sample_w.csv", "sample_summary.json", "sample_0.wkin", "conservation.csv", "final.wkin", "comparison_0.json", "covariance_0.gp", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let cons = std::fs::read_to_string(out.join("conservation.csv")).unwrap();
    assert_eq!(cons.lines().next().unwrap(), "t,N,H");
    let cov = std::fs::read_to_string(out.join("covariance_0.csv")).unwrap();
    assert_eq!(cov.lines().next().unwrap(), "k1,k2,t,re,im,stderr_re,stderr_im,n_real");
}

#[test]
fn graph_subcommands_print_records() {
    let o = wkin(&["graphs", "--dump", "--ell", "3,1,3,1", "--partition", "0-4,1-9,2-6,3-8,5-7"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("graph n=4 n'=0 ell=[3,1,3,1]"));
    let o = wkin(&["graphs", "--count-leading", "4", "--scope", "main"]);
    assert!(stdout(&o).contains("leading 228"));
    let o = wkin(&["graphs", "--verify-identities"]);
    assert!(o.status.success());
    let o = wkin(&["graphs", "--dump", "--ell", "1", "--partition", "0-1-2-3", "--interlacing", "x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn kinetic_flow_conserves_mass_and_energy() {
    let dir = tempfile::tempdir().unwrap();
    let o = wkin(&["--out", dir.path().to_str().unwrap(), "predict", "--solve", "--d", "2", "--m", "8", "--t-max", "20", "--t-end", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let nums: Vec<f64> = text.split_whitespace().filter_map(|w| w.parse().ok()).collect();
    // t, mass₀, mass₁, energy₀, energy₁
    assert!((nums[1] - nums[2]).abs() <= 1e-2 * nums[1], "{text}");
    assert!((nums[3] - nums[4]).abs() <= 1e-2 * nums[3].abs(), "{text}");
}
