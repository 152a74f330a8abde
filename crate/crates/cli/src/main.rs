//! `more`: align, refine, evaluate and synthesize two-view point-map scenes.
//!
//! Exit codes: 0 success, 1 other failure, 2 input could not be loaded,
//! 3 degenerate matches, 4 non-finite loss.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use more_core::metrics::INLIER_THRESHOLD;
use more_core::optimizer::RefinementAborted;
use more_core::Error;

#[derive(Parser)]
#[command(name = "more", version, about = "Point-map alignment and graph refinement")]
struct Cli {
    /// Print a single JSON object on stdout and nothing else.
    #[arg(long, global = true)]
    json: bool,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "MORE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen matches and solve the source scale and shift.
    Align(AlignArgs),
    /// Align, then refine both point maps.
    Refine(RefineArgs),
    /// Depth and point-cloud metrics of a result against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic bundle from a scene spec.
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct AlignArgs {
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// RANSAC seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_ransac: bool,
    /// Refinement config JSON; only its `ransac` and `confidence_threshold` matter here.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct RefineArgs {
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use this alignment instead of solving. Defaults to
    /// `<bundle>/alignment.json` when that file exists.
    #[arg(long)]
    pub alignment: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Result directory from `refine` or `align`.
    pub pred: PathBuf,
    /// `ground_truth.npz`.
    pub gt: PathBuf,
    #[arg(long)]
    pub median_scaling: bool,
    /// Also compute accuracy and completeness of the merged cloud.
    #[arg(long)]
    pub pointcloud: bool,
    #[arg(long, default_value_t = INLIER_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Args)]
pub struct SynthArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// What a command reports: a JSON object and its human-readable form.
pub struct Report {
    pub json: serde_json::Value,
    pub text: String,
}

fn core_error_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. }
        | Error::Format { .. }
        | Error::ShapeMismatch { .. }
        | Error::InvalidCamera(_)
        | Error::InvalidGrid { .. }
        | Error::LengthMismatch { .. } => 2,
        Error::TooFewMatches { .. } | Error::NoInliers { .. } | Error::ScaleUnobservable | Error::NonPositiveScale(_) => 3,
        Error::NonFiniteLoss { .. } => 4,
        _ => 1,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_error_code(e);
        }
        if let Some(a) = cause.downcast_ref::<RefinementAborted>() {
            return core_error_code(&a.error);
        }
        if cause.downcast_ref::<commands::LoadError>().is_some() {
            return 2;
        }
    }
    1
}

/// The error chain joined by `: `, skipping causes already spelled out by
/// the message before them.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    let result = match &cli.command {
        Command::Align(a) => commands::align(a),
        Command::Refine(a) => commands::refine(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(report) => {
            if cli.json {
                println!("{}", report.json);
            } else {
                print!("{}", report.text);
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let code = exit_code(&err);
            let msg = message(&err);
            eprintln!("error: {msg}");
            if cli.json {
                println!("{}", serde_json::json!({ "error": msg, "exit_code": code }));
            }
            ExitCode::from(code)
        }
    }
}
