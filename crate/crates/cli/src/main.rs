//! `symmin`: batch driver for averaging, minimization and probe experiments.
//!
//! Exit codes: 0 success, 1 verify-suite failure, 2 usage or parse error,
//! 3 domain/group invariance violation, 4 solver divergence, 5 I/O error.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{read_config_file, ExperimentConfig, UsageError};

#[derive(Parser)]
#[command(
    name = "symmin",
    version,
    about = "Symmetric averaging and minimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// G-average a field and report the averaging inequalities.
    Average(RunArgs),
    /// Minimize, G-average the minimizer, and polish.
    Minimize(RunArgs),
    /// Search the orbit for an element reproducing the average.
    ProbeMeanvalue(RunArgs),
    /// Measure how far minors fail to commute with averaging.
    ProbePolyconvex(RunArgs),
    /// Estimate the Lipschitz constant of the group action.
    ProbeContinuity(RunArgs),
    /// Run the invariant checks and exit nonzero on any failure.
    VerifySuite(RunArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// interval | square | disk | annulus:r0 | polygon:k
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    resolution: Option<usize>,
    /// cyclic:n | dihedral:n | reflect1d | so2:N | trivial
    #[arg(long)]
    group: Option<String>,
    /// plaplace:p=P[,eps=E] | polyharmonic:m=M
    #[arg(long)]
    functional: Option<String>,
    /// linear:λ | quadratic:a,b | negexp
    #[arg(long)]
    nonlinearity: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Smoothing passes for generated random fields.
    #[arg(long)]
    smoothness: Option<usize>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<String>,
    /// Read the field from a text file instead of generating one.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Also write PGM heatmaps.
    #[arg(long)]
    pgm: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Pair budget for the continuity probe.
    #[arg(long)]
    pairs: Option<usize>,
    /// Norm exponent for the continuity probe (default: the functional's).
    #[arg(long)]
    p: Option<f64>,
    /// Matrix shape for the polyconvexity probe, e.g. 2x3.
    #[arg(long)]
    shape: Option<String>,
    /// Minor order for the polyconvexity probe.
    #[arg(long)]
    minor: Option<usize>,
    /// Number of random fields in verify-suite.
    #[arg(long)]
    fields: Option<u64>,
}

impl RunArgs {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("domain", self.domain.clone());
        put("resolution", self.resolution.map(|v| v.to_string()));
        put("group", self.group.clone());
        put("functional", self.functional.clone());
        put("nonlinearity", self.nonlinearity.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("smoothness", self.smoothness.map(|v| v.to_string()));
        put("out", self.out.clone());
        put(
            "input",
            self.input.as_ref().map(|p| p.display().to_string()),
        );
        put("pgm", self.pgm.then(|| "true".to_string()));
        put("max_iters", self.max_iters.map(|v| v.to_string()));
        put("grad_tol", self.grad_tol.map(|v| v.to_string()));
        put("pairs", self.pairs.map(|v| v.to_string()));
        put("p", self.p.map(|v| v.to_string()));
        put("shape", self.shape.clone());
        put("minor", self.minor.map(|v| v.to_string()));
        put("fields", self.fields.map(|v| v.to_string()));
        m
    }

    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut map = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        map.extend(self.overrides());
        ExperimentConfig::from_map(&map)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<symmin::Error>() {
            return match e {
                symmin::Error::InvalidParameter(_) | symmin::Error::Parse { .. } => 2,
                symmin::Error::InvariantDomainViolation { .. }
                | symmin::Error::NotInvariant { .. } => 3,
                symmin::Error::Divergence { .. } => 4,
                symmin::Error::Io(_) => 5,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 5;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Average(a) => a.resolve().and_then(|c| commands::average(&c)),
        Command::Minimize(a) => a.resolve().and_then(|c| commands::minimize(&c)),
        Command::ProbeMeanvalue(a) => a.resolve().and_then(|c| commands::probe_meanvalue(&c)),
        Command::ProbePolyconvex(a) => a.resolve().and_then(|c| commands::probe_polyconvex(&c)),
        Command::ProbeContinuity(a) => a.resolve().and_then(|c| commands::probe_continuity(&c)),
        Command::VerifySuite(a) => a.resolve().and_then(|c| commands::verify_suite(&c)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
