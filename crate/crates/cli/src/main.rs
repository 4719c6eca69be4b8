//! `aps-lab`: scenario generation, label assignment, assigner comparison,
//! receptive-field queries, and heatmap rendering.
//!
//! Every command is deterministic for fixed inputs and flags. Machine-readable
//! output goes to files or stdout; diagnostics go to stderr. Exit code 0 means
//! success, 2 a usage or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

mod assign;
mod compare;
mod gen;
mod pgm;
mod render;
mod rf;

#[derive(Parser)]
#[command(
    name = "aps-lab",
    version,
    about = "Loss-driven label assignment lab",
    after_help = "Heatmaps are 8-bit binary PGM (P5), one file per pyramid level; cell values are\n\
                  mapped linearly from [min_loss, max_loss] of that level's map to [0, 255], so\n\
                  brighter means larger loss. The APS_LAB_THREADS environment variable (integer\n\
                  >= 1) caps comparison parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Aligned,
    Misaligned,
    Random,
}

impl From<PresetArg> for aps_core::Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Aligned => aps_core::Preset::Aligned,
            PresetArg::Misaligned => aps_core::Preset::Misaligned,
            PresetArg::Random => aps_core::Preset::Random,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AssignerArg {
    Aps,
    Center,
    #[value(name = "all-in-box")]
    AllInBox,
}

impl From<AssignerArg> for aps_core::AssignerKind {
    fn from(a: AssignerArg) -> Self {
        match a {
            AssignerArg::Aps => aps_core::AssignerKind::Aps,
            AssignerArg::Center => aps_core::AssignerKind::Center,
            AssignerArg::AllInBox => aps_core::AssignerKind::AllInBox,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RenderWhat {
    Cls,
    Reg,
    Gap,
    Assignment,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file from a preset.
    Gen {
        /// Output path for the scenario JSON.
        #[arg(long)]
        out: PathBuf,
        /// Seed driving every random draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario family to generate.
        #[arg(long, value_enum, default_value_t = PresetArg::Misaligned)]
        preset: PresetArg,
        /// Number of instances.
        #[arg(long, default_value_t = 2)]
        instances: usize,
    },
    /// Assign labels for a scenario and write the result as JSON.
    Assign {
        /// Scenario file produced by `gen` (or hand-written).
        #[arg(long)]
        scenario: PathBuf,
        /// Assignment strategy.
        #[arg(long, value_enum, default_value_t = AssignerArg::Aps)]
        assigner: AssignerArg,
        /// Per-level candidate cap for the sampler.
        #[arg(long, default_value_t = 9)]
        k: usize,
        /// Output path for the assignment JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare assigners over a directory of scenario files.
    Compare {
        /// Directory containing `*.json` scenario files.
        #[arg(long)]
        corpus: PathBuf,
        /// Per-level candidate cap for the sampler.
        #[arg(long, default_value_t = 9)]
        k: usize,
        /// Also write the JSON report to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Receptive-field table for a convolution stack.
    Rf {
        /// Stack description: `k,s,p[,offset];...` one layer per `;`.
        #[arg(long)]
        stack: String,
    },
    /// Render per-level heatmaps of a scenario as PGM images.
    Render {
        /// Scenario file.
        #[arg(long)]
        scenario: PathBuf,
        /// Quantity to render.
        #[arg(long, value_enum)]
        what: RenderWhat,
        /// Assigner used for `--what assignment`.
        #[arg(long, value_enum, default_value_t = AssignerArg::Aps)]
        assigner: AssignerArg,
        /// Per-level candidate cap for the sampler.
        #[arg(long, default_value_t = 9)]
        k: usize,
        /// Output directory; one PGM per level is written into it.
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("APS_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .with_context(|| format!("APS_LAB_THREADS must be an integer >= 1, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("failed to configure the thread pool")?;
    Ok(())
}

fn run() -> Result<()> {
    configure_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            out,
            seed,
            preset,
            instances,
        } => gen::run(&out, seed, preset.into(), instances),
        Command::Assign {
            scenario,
            assigner,
            k,
            out,
        } => assign::run(&scenario, assigner.into(), k, &out),
        Command::Compare { corpus, k, json } => compare::run(&corpus, k, json.as_deref()),
        Command::Rf { stack } => rf::run(&stack),
        Command::Render {
            scenario,
            what,
            assigner,
            k,
            out,
        } => render::run(&scenario, what, assigner.into(), k, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
