//! `tokensel` command-line front end.

mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tokensel::SolverKind;

const OPERATING_POINTS: &str = "\
Reference operating points: alpha 0.9, streaming window 1000 tokens.
Typical selection budgets k: 16 (LVBench-style QA), 256 (MovieChat-style QA),
200 or 450 (Ego4D-NLQ-style grounding). Tracklet length bounds: L_min 8 /
L_max 16 (MovieChat), 16 / 32 (Ego4D-NLQ).

Exit codes: 0 success, 1 data error, 2 usage error.";

#[derive(Debug, Parser)]
#[command(name = "tokensel", version, about = "Query-relevant, diverse token selection for long videos", after_help = OPERATING_POINTS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic token file and its ground truth.
    Simulate(SimulateArgs),
    /// Run one global selection over a token file.
    Select(SelectArgs),
    /// Run streaming selection over consecutive windows.
    Stream(StreamArgs),
    /// Ground the query with the relevance baseline and score Recall@{1,5}.
    GroundEval(GroundEvalArgs),
    /// Repeat global selection over a grid of alpha values.
    SweepAlpha(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub num_tokens: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// Scene,object,action proportions.
    #[arg(long, default_value = "0.625,0.261,0.114", value_parser = parse_kind_mix)]
    pub kind_mix: [f64; 3],
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    pub clusters: u64,
    #[arg(long, default_value_t = 0.3, value_parser = parse_non_negative)]
    pub spread: f64,
    #[arg(long, default_value_t = 8)]
    pub planted: u64,
    #[arg(long, default_value_t = 0.2, value_parser = parse_margin)]
    pub margin: f64,
    #[arg(long, default_value_t = 600.0, value_parser = parse_positive)]
    pub video_length: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Token file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth file to write (also carries the query).
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct InputArgs {
    /// Token file (line-delimited JSON).
    #[arg(long)]
    pub tokens: PathBuf,
    /// Query file; defaults to the query stored in --truth.
    #[arg(long)]
    pub query: Option<PathBuf>,
    /// Ground-truth file; enables recovery reporting.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SelectionArgs {
    /// Relevance/diversity trade-off.
    #[arg(long, default_value_t = 0.9, value_parser = parse_alpha)]
    pub alpha: f64,
    /// Number of tokens to keep.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// exact, greedy, local or qp.
    #[arg(long, default_value = "local", value_parser = parse_solver)]
    pub solver: SolverKind,
    /// Similarity floor before inversion.
    #[arg(long, default_value_t = 1e-3, value_parser = parse_epsilon)]
    pub epsilon: f64,
    /// Divide each objective term by its element or pair count.
    #[arg(long)]
    pub normalize_terms: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_passes: u64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub qp_steps: u64,
    #[arg(long, default_value_t = 0.05, value_parser = parse_positive)]
    pub qp_step_size: f64,
    /// Largest candidate count the exact solver enumerates.
    #[arg(long, default_value_t = 20)]
    pub exact_limit: u64,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Uniformly pre-sample to this many tokens before selecting.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub presample: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Tokens per streaming window.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
}

#[derive(Debug, Args)]
pub struct GroundEvalArgs {
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long)]
    pub query: Option<PathBuf>,
    /// Ground-truth file holding the target moment.
    #[arg(long)]
    pub truth: PathBuf,
    /// Report from `select` or `stream`; restricts grounding to its tokens.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Ranked moments to keep per query.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub top_k: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Comma-separated alpha grid.
    #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1", value_parser = parse_alpha_grid)]
    pub alphas: AlphaGrid,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub presample: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct AlphaGrid(pub Vec<f64>);

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("'{s}' is not a number: {e}"))
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn parse_alpha_grid(s: &str) -> Result<AlphaGrid, String> {
    let values = s.split(',').map(parse_alpha).collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("alpha grid is empty".into());
    }
    Ok(AlphaGrid(values))
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

fn parse_margin(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1]"))
    }
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse::<SolverKind>().map_err(|e| e.to_string())
}

fn parse_kind_mix(s: &str) -> Result<[f64; 3], String> {
    let parts = s.split(',').map(parse_f64).collect::<Result<Vec<_>, _>>()?;
    let mix: [f64; 3] = parts.try_into().map_err(|_| "expected three comma-separated proportions".to_string())?;
    if mix.iter().any(|p| *p < 0.0) || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(format!("{mix:?} must be non-negative and sum to 1"));
    }
    Ok(mix)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(report) => match serde_json::to_string_pretty(&report) {
            Ok(text) => {
                let mut out = std::io::stdout().lock();
                match writeln!(out, "{text}") {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                        eprintln!("error: {e}");
                        ExitCode::from(1)
                    }
                    _ => ExitCode::SUCCESS,
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
