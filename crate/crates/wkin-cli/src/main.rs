//! `wkin` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wkin", version, about = "Lattice NLS kinetic-theory laboratory")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the master seed of the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory, created when missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draws a Gibbs ensemble and reports its spectral covariance.
    Sample(SampleArgs),
    /// Evolves one Gibbs draw and logs the conserved quantities.
    Evolve(EvolveArgs),
    /// Estimates the phase-removed covariance series and the quadratic form.
    Covariance(CovarianceArgs),
    /// Kinetic predictions: decay rate, renormalized frequency, kinetic flow.
    Predict(PredictArgs),
    /// Dispersive decay reports.
    VerifyDr(VerifyDrArgs),
    /// Interaction histories, graph classification and simplex identities.
    Graphs(GraphsArgs),
    /// Fits decay rates to simulated covariances and compares with theory.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Index into the configured coupling list.
    #[arg(long, default_value_t = 0)]
    pub lambda_index: usize,
    /// Number of draws; defaults to the configured realization count.
    #[arg(long)]
    pub count: Option<usize>,
    /// Number of draws also saved as snapshot files.
    #[arg(long, default_value_t = 0)]
    pub snapshots: usize,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long, default_value_t = 0)]
    pub lambda_index: usize,
    /// Realization index selecting the random stream of the initial field.
    #[arg(long, default_value_t = 0)]
    pub realization: u64,
}

#[derive(Debug, Args)]
pub struct CovarianceArgs {
    #[arg(long, default_value_t = 0)]
    pub lambda_index: usize,
    /// Records every lattice mode instead of the configured list.
    #[arg(long)]
    pub all_modes: bool,
    /// Also evaluates the quadratic form for `f = g = δ₀` by both routes;
    /// implies `--all-modes`.
    #[arg(long)]
    pub q: bool,
    /// Realizations per batch of the batch-mean errors.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Prints `Γ` at each `--k` as CSV.
    #[arg(long)]
    pub gamma: bool,
    /// Prints `ω_ren` at each `--k`; needs `--lambda` and `--r0`.
    #[arg(long)]
    pub omega_ren: bool,
    /// Integrates the homogeneous kinetic equation from a perturbed equilibrium.
    #[arg(long)]
    pub solve: bool,
    /// Momentum as comma-separated torus coordinates; repeatable.
    #[arg(long, value_name = "K1,K2,...", allow_hyphen_values = true)]
    pub k: Vec<String>,
    /// Dimension when no momentum or configuration fixes it.
    #[arg(long)]
    pub d: Option<usize>,
    /// Quadrature grid size per axis.
    #[arg(long)]
    pub m: Option<usize>,
    /// Quadrature time horizon.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
    /// End time of `--solve` in kinetic units.
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    /// Initial step of `--solve`.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct VerifyDrArgs {
    /// Decay exponent of the ℓ³ norm of the free propagator.
    #[arg(long)]
    pub dr2: bool,
    /// Interference integral constant near the singular manifold.
    #[arg(long)]
    pub dr3: bool,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Lattice size of the propagator evaluation.
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    #[arg(long, default_value_t = 5.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    /// Log-spaced sample times.
    #[arg(long, default_value_t = 12)]
    pub points: usize,
    /// Sign of the interference integral.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub sigma: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scope {
    Main,
    All,
}

#[derive(Debug, Args)]
pub struct GraphsArgs {
    /// Prints the number of interaction histories with `n` interactions.
    #[arg(long, value_name = "N")]
    pub count_histories: Option<usize>,
    /// Counts the leading graphs with `N` interactions.
    #[arg(long, value_name = "N")]
    pub count_leading: Option<usize>,
    /// Histogram of graph classes with `N` interactions.
    #[arg(long, value_name = "N")]
    pub classify: Option<usize>,
    /// History scope of `--count-leading` and `--classify`.
    #[arg(long, value_enum, default_value_t = Scope::All)]
    pub scope: Scope,
    /// Prints the record of the graph given by the flags below.
    #[arg(long)]
    pub dump: bool,
    /// Plus-tree history, e.g. `3,1,3,1`.
    #[arg(long, value_name = "L1,L2,...")]
    pub ell: Option<String>,
    /// Minus-tree history.
    #[arg(long, value_name = "L1,L2,...")]
    pub ell_minus: Option<String>,
    /// Order of the two trees' interactions, e.g. `--+-`.
    #[arg(long, allow_hyphen_values = true)]
    pub interlacing: Option<String>,
    /// Cluster blocks, e.g. `0-4,1-9,2-6,3-8,5-7`.
    #[arg(long)]
    pub partition: Option<String>,
    /// Checks the interlacing and resolvent identities on random phases.
    #[arg(long)]
    pub verify_identities: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 0)]
    pub lambda_index: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
