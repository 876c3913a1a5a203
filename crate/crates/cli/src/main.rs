//! `vqstyle`: file-based pipeline from a synthetic corpus to an evaluation
//! report.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 I/O error.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vqstyle::guidance::GuidanceMode;

#[derive(Parser)]
#[command(name = "vqstyle", version, about = "Style-guided sampling over token grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Seed precedence: `--seed`, then `GCS_SEED`, then the command's default.
#[derive(Args, Clone, Copy)]
struct SeedArg {
    #[arg(long, env = "GCS_SEED")]
    seed: Option<u64>,
}

#[derive(Args, Clone, Copy, Default)]
#[group(multiple = false)]
struct Granularity {
    /// One distribution per semantic label (needs SGRD files).
    #[arg(long)]
    by_region: bool,
    /// One distribution per cell of an RxC tiling, e.g. `2x2`.
    #[arg(long, value_name = "RxC", value_parser = parse_cells)]
    by_cell: Option<(usize, usize)>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark corpus, exemplars and manifest.
    GenWorld {
        /// Benchmark config JSON.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Built-in benchmark: landscape-2x4 or mirrored-bands.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Train a count-based Markov prior on a corpus.
    TrainPrior {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated context offsets: left, above, above-left, above-right.
        #[arg(long, default_value = "left,above")]
        context: String,
        /// Condition on the semantic label at each position.
        #[arg(long)]
        conditional: bool,
        #[arg(long, default_value_t = vqstyle::distributions::DEFAULT_SMOOTHING)]
        alpha: f64,
    },
    /// Monte-Carlo estimate of the dataset index distribution.
    DatasetStats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of grids drawn with replacement.
        #[arg(long, default_value_t = vqstyle::distributions::DEFAULT_MONTE_CARLO_K)]
        k: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = vqstyle::distributions::DEFAULT_SMOOTHING)]
        alpha: f64,
        #[command(flatten)]
        granularity: Granularity,
    },
    /// Index distribution of one or more style exemplars.
    StyleStats {
        /// TGRD files or directories of them; a sibling `.sgrd` supplies semantics.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = vqstyle::distributions::DEFAULT_SMOOTHING)]
        alpha: f64,
        /// Average per-exemplar distributions instead of pooling counts.
        #[arg(long)]
        average: bool,
        #[command(flatten)]
        granularity: Granularity,
    },
    /// Sample grids from a trained prior, optionally style-guided.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Style statistics (from style-stats).
        #[arg(long, required_unless_present = "no_guidance")]
        style: Option<PathBuf>,
        /// Dataset statistics (from dataset-stats).
        #[arg(long, required_unless_present = "no_guidance")]
        dataset: Option<PathBuf>,
        /// SGRD semantic map shared by all samples; fixes the grid shape.
        #[arg(long)]
        semantics: Option<PathBuf>,
        /// Grid height when no semantic map is given.
        #[arg(long, requires = "width")]
        height: Option<usize>,
        #[arg(long, requires = "height")]
        width: Option<usize>,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long)]
        top_k: Option<usize>,
        /// Guidance strength exponent.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Sample from the prior alone.
        #[arg(long, conflicts_with_all = ["style", "dataset", "mode", "lambda"])]
        no_guidance: bool,
        /// Force global, regional or spatial guidance.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<GuidanceMode>,
    },
    /// Compare guided and unguided samples against a target style.
    Evaluate {
        #[arg(long)]
        guided: PathBuf,
        #[arg(long)]
        unguided: PathBuf,
        /// Target style statistics.
        #[arg(long)]
        style: PathBuf,
        /// Report JSON; a CSV with per-sample rows is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Extra style statistics to classify samples against, together with
        /// the target.
        #[arg(long = "reference")]
        references: Vec<PathBuf>,
    },
}

fn parse_cells(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, e.g. 2x2, got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("cell counts must be positive integers, got {s:?}"))
    };
    Ok((parse(r)?, parse(c)?))
}

fn parse_mode(s: &str) -> Result<GuidanceMode, String> {
    s.parse().map_err(|e: vqstyle::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
