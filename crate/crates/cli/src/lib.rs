//! `singcot`: build singular cotangent models, verify them and export reports.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 bad input, 3 unsupported model.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use singular_cotangent::Error;

mod classify;
mod flow;
mod level;
mod report;
mod sphere;
mod systems;
mod verify;

pub use report::Output;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;

const MODEL_HELP: &str = "Model string: factors r (regular), e (elliptic), h (hyperbolic), ff (focus-focus) joined by '*', e.g. \"h*ff\". \
flow and sample-level also accept the systems \"sphere\", \"figure-eight\" and \"figure-eight-unglued\".";

#[derive(Parser, Debug)]
#[command(name = "singcot", version, about = "Verification suite for singular cotangent models of integrable systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Seed for every randomized check
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Directory for JSON and CSV reports (created if missing)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; defaults to the available parallelism
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Print the JSON report on stdout instead of the text summary
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Glue the local cotangent model and check commutation, descent and the atlas
    Verify(verify::VerifyArgs),
    /// Williamson type at the origin, branch count and leaf-type identity
    Classify(classify::ClassifyArgs),
    /// Build the glued sphere system, scan its singular set and check conservation
    Sphere(sphere::SphereArgs),
    /// Integrate one Hamiltonian flow and export the trajectory
    Flow(flow::FlowArgs),
    /// Explore a level set along all flows and report boundary hits
    SampleLevel(level::LevelArgs),
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(s) => write!(f, "{s}"),
            CliError::Io(s) => write!(f, "i/o: {s}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_BAD_INPUT,
            CliError::Core(e) => match e {
                Error::EllipticFactorUnsupported => EXIT_UNSUPPORTED,
                Error::Parse { .. }
                | Error::EpsilonOutOfRange(_)
                | Error::InvalidArgument(_)
                | Error::SeedOffLevel { .. }
                | Error::SequenceInvalid
                | Error::UnknownLabel(_)
                | Error::UnknownChart(_)
                | Error::OutOfDomain { .. }
                | Error::DimensionMismatch { .. } => EXIT_BAD_INPUT,
                _ => EXIT_FAIL,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    run_cli(cli)
}

pub fn run_cli(cli: Cli) -> i32 {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.global.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return EXIT_BAD_INPUT;
        }
        builder = builder.num_threads(w);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_BAD_INPUT;
        }
    };
    let out = Output::new(cli.global.out.clone(), cli.global.json);
    let result = pool.install(|| match &cli.command {
        Command::Verify(a) => verify::run(a, &cli.global, &out),
        Command::Classify(a) => classify::run(a, &cli.global, &out),
        Command::Sphere(a) => sphere::run(a, &cli.global, &out),
        Command::Flow(a) => flow::run(a, &cli.global, &out),
        Command::SampleLevel(a) => level::run(a, &cli.global, &out),
    });
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn positive(name: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {v}")))
    }
}

pub(crate) fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}
