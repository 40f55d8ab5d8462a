mod commands;
mod manifest;
mod overlay;
mod seq;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "dcmot",
    version,
    about = "Depth-cascaded multi-object tracking toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    /// Two-stage association with full-matrix matching in both stages.
    Byte,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tracker over one sequence directory.
    Track {
        /// Sequence directory (det.txt or det/det.txt inside).
        #[arg(long)]
        seq: PathBuf,
        /// Flat JSON config file.
        #[arg(long)]
        config: PathBuf,
        /// Camera-motion warp sidecar (frame a11 a12 a13 a21 a22 a23).
        #[arg(long)]
        warps: Option<PathBuf>,
        /// Swap the cascade for the full-matrix baseline association.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Result file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic sequences.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Number of sequences; seed i uses config seed + i.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a result file against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        res: PathBuf,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the low-stage depth-level ablation over a set of sequences.
    Sweep {
        /// Directory of sequence subdirectories (gt.txt + det.txt each).
        #[arg(long)]
        set: PathBuf,
        /// Comma-separated depth level counts, e.g. 1,2,5,7,9.
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        /// Aggregated CSV to write; per-sequence rows land next to it.
        #[arg(long)]
        out: PathBuf,
        /// Optional base tracker config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render one SVG per frame with boxes colored by depth level.
    Overlay {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long)]
        res: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional tracker config (sets the number of depth levels).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn init_thread_pool() -> Result<()> {
    if let Ok(raw) = std::env::var("ST_THREADS") {
        let n: usize = raw
            .parse()
            .with_context(|| format!("ST_THREADS must be a positive integer, got `{raw}`"))?;
        if n == 0 {
            anyhow::bail!("ST_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("failed to size the worker pool")?;
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    init_thread_pool()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Track {
            seq,
            config,
            warps,
            baseline,
            out,
        } => commands::track(&seq, &config, warps.as_deref(), baseline.is_some(), &out),
        Command::Simulate { config, seeds, out } => commands::simulate(&config, seeds, &out),
        Command::Eval { gt, res, json } => commands::eval(&gt, &res, json),
        Command::Sweep {
            set,
            k,
            out,
            config,
        } => commands::sweep(&set, &k, &out, config.as_deref()),
        Command::Overlay {
            seq,
            res,
            out,
            config,
        } => commands::overlay_cmd(&seq, &res, &out, config.as_deref()),
    }
}
