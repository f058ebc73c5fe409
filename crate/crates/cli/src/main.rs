use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

mod commands;

use lpentropy::Error;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(
    name = "lpentropy",
    version,
    about = "Sharp L^p entropy and Gagliardo–Nirenberg inequalities, numerically"
)]
pub struct Cli {
    #[command(subcommand)]
    #[serde(skip)]
    pub command: Command,
    /// Dimension
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// One value, or a comma-separated list for scans
    #[arg(long, global = true, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    /// Decay rate of the extremal a·e^{-b r^{p/(p-1)}}
    #[arg(long, global = true)]
    pub b: Option<f64>,
    #[arg(long = "eps-grid", global = true, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Penalty constant; a comma-separated list for penalty scans
    #[arg(long = "C", global = true, value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    /// Entropy constant A (absolute); overrides --a-ratio
    #[arg(long = "A", global = true)]
    pub a: Option<f64>,
    /// A as a multiple of the sharp Euclidean constant
    #[arg(long = "a-ratio", global = true)]
    pub a_ratio: Option<f64>,
    /// Second constant B
    #[arg(long = "B", global = true)]
    pub b_const: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long = "p-from", global = true)]
    pub p_from: Option<f64>,
    /// Upper exponent; accepts `inf`
    #[arg(long = "q-to", global = true)]
    pub q_to: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelArg>,
    /// Sphere radius or torus side
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Ascent steps for the GN estimator
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Grid nodes for the manifold minimizer
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    /// Ultracontractivity slack as a fraction of |m|
    #[arg(long, global = true)]
    pub slack: Option<f64>,
    /// Skip the GN-estimator ceiling in nu-scan
    #[arg(long = "no-ceiling", global = true)]
    pub no_ceiling: bool,
    /// Directory for CSV tables
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Best constants and interpolation exponents
    Constants,
    /// Normalized extremal profile and its I/J integrals
    Extremal,
    /// Entropy deficit of the extremal
    Deficit,
    /// Lower bound for the GN constant A0(p,q,r)
    GnEstimate,
    /// GN estimates along q -> p-
    GnLimit,
    /// Curvature expansion of bubble integrals
    Bubble,
    /// Search for a violation of the entropy inequality with constant A
    Witness,
    /// Constrained minimization of J_q on a model manifold
    Minimize,
    /// nu_q(C) along a list of q, or along a list of C
    NuScan,
    /// Semigroup integrals and the ultracontractivity table
    Hc,
    /// Flat-torus heat kernel diagonal
    HeatNorm,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Sphere,
    Torus,
}

/// What a command hands back to the driver.
pub struct Outcome {
    pub config: Value,
    pub result: Value,
    pub csv: Vec<(String, String)>,
    /// Failed property checks; any entry turns the exit code into 3.
    pub failures: Vec<String>,
}

pub enum Failure {
    Core(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NonConvergence(_) | Error::Quadrature(_) | Error::OracleDisagreement { .. } => 2,
        _ => 1,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Domain(_) => "domain",
        Error::GridTooCoarse(_) => "grid_too_coarse",
        Error::Normalization { .. } => "normalization",
        Error::ZeroProfile => "zero_profile",
        Error::DegenerateProfile(_) => "degenerate_profile",
        Error::Quadrature(_) => "quadrature",
        Error::OracleDisagreement { .. } => "oracle_disagreement",
        Error::NonConvergence(_) => "non_convergence",
    }
}

fn print_json(doc: &Value) {
    println!("{}", serde_json::to_string_pretty(doc).expect("JSON values always serialize"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    if let Some(threads) = std::env::var("THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second initialization only happens in tests; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let header = |config: &Value| {
        json!({
            "tool": "lpentropy",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cli.command,
            "config": config,
        })
    };
    match commands::run(&cli) {
        Ok(outcome) => {
            let mut doc = header(&outcome.config);
            doc["result"] = outcome.result;
            doc["failures"] = json!(outcome.failures);
            if let Some(dir) = &cli.out {
                if let Err(e) = write_tables(dir, &outcome.csv) {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            print_json(&doc);
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("check failed: {f}");
                }
                ExitCode::from(3)
            }
        }
        Err(Failure::Core(e)) => {
            let mut doc = header(&json!(cli));
            doc["error"] = json!({ "kind": error_kind(&e), "message": e.to_string() });
            print_json(&doc);
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn write_tables(dir: &PathBuf, tables: &[(String, String)]) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    for (name, body) in tables {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}
