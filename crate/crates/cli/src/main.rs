//! `cfpu`: reconstruct implicit curves and surfaces from oriented point
//! clouds, generate synthetic test clouds and measure reconstruction errors.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::FitArgs;

#[derive(Parser, Debug)]
#[command(name = "cfpu", version, about = "Curl-free partition of unity surface reconstruction")]
struct Cli {
    /// Log verbosity; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a cloud and write the zero-level mesh (3D) or polylines (2D).
    Reconstruct(ReconstructArgs),
    /// Write a synthetic oriented cloud as xyz.
    Synth(SynthArgs),
    /// Reconstruct a synthetic shape and report potential errors on it.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Input cloud.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format (xyz, ply, obj); taken from the extension if omitted.
    #[arg(long)]
    format: Option<String>,
    /// Output mesh.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format (obj, ply); taken from the extension if omitted.
    #[arg(long)]
    mesh_format: Option<String>,
    /// Run summary CSV; defaults to `<output>.summary.csv`.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Per-patch CSV; defaults to `<output>.patches.csv`.
    #[arg(long)]
    patch_summary: Option<PathBuf>,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Cassini,
    Trefoil,
    Sphere,
}

#[derive(Args, Debug, Clone)]
pub struct ShapeArgs {
    #[arg(long, value_enum)]
    shape: Shape,
    /// Number of samples (approximate for the trefoil lattice).
    #[arg(long)]
    n: usize,
    /// Cassini parameter a.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Cassini parameter b.
    #[arg(long, default_value_t = 1.1)]
    b: f64,
    /// Tube radius (trefoil) or sphere radius; 0.7 and 1 by default.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Standard deviation of Gaussian noise added to the normals.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Fit this cloud instead of sampling the shape.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Exact-surface samples for the error.
    #[arg(long)]
    eval_samples: Option<usize>,
    /// CSV to append `n,order,rms,max` rows to.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    fit: FitArgs,
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_MISSING_NORMALS: u8 = 4;
pub const EXIT_DEGENERATE_PATCH: u8 = 5;
pub const EXIT_UNCOVERED: u8 = 6;
pub const EXIT_WRITE: u8 = 7;

impl CliError {
    pub fn usage(message: String) -> Self {
        CliError { code: EXIT_USAGE, message }
    }

    pub fn write(e: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_WRITE,
            message: format!("write failed: {e}"),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<cfpu::Error> for CliError {
    fn from(e: cfpu::Error) -> Self {
        use cfpu::Error as E;
        let code = match &e {
            E::Io { .. } | E::Parse { .. } | E::MixedDimension { .. } | E::EmptyInput => EXIT_PARSE,
            E::MissingNormals => EXIT_MISSING_NORMALS,
            E::DegeneratePatch { .. } => EXIT_DEGENERATE_PATCH,
            E::Uncovered | E::ExcessUncovered { .. } => EXIT_UNCOVERED,
            E::InvalidParameter(_) | E::UnsupportedDimension(_) => EXIT_USAGE,
            _ => EXIT_OTHER,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Synth(a) => commands::synth(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
