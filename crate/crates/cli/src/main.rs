//! `awe`: dataset generation, training, evaluation, gradient audits and
//! method-comparison grids for acoustic word embeddings.

mod commands;
mod config;
mod error;

use clap::{Args, Parser, Subcommand, ValueEnum};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable holding the worker-thread count.
const WORKERS_ENV: &str = "AWE_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "awe",
    version,
    about = "Proxy-based multi-view metric learning for acoustic word embeddings",
    after_help = "Worker threads: set AWE_WORKERS (default: all cores). Outputs do not depend on it.\n\
                  Exit codes: 0 success, 2 usage or config error, 3 numeric failure \
                  (divergence, failed audit), 4 I/O or file-format error.",
    after_long_help = defaults_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config with optional [dataset], [train], [grid] and [audit]
    /// sections; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides the config's seed for this command.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct DatasetArg {
    /// Dataset file written by `generate`; generated from the config's
    /// [dataset] section when omitted.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Dev,
    Test,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic corpus into OUT/dataset.bin (--seed sets the
    /// dataset seed).
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model; writes record.json, curve.csv, model.json,
    /// timings.json and config.toml (--seed sets the training seed).
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DatasetArg,
    },
    /// Evaluate a checkpoint; writes eval.json.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DatasetArg,
        /// Checkpoint written by `train`.
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also score the raw-feature DTW baseline.
        #[arg(long)]
        dtw: bool,
    },
    /// Finite-difference audit of every objective and both encoders; writes
    /// audit.json and exits 3 when any check exceeds its tolerance (--seed
    /// sets the audit seed).
    GradCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Train every row of a comparison table; writes grid.json, table.md,
    /// table.csv and one run directory per row and repeat (--seed sets the
    /// base training seed).
    Grid {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DatasetArg,
        /// Table number, overriding grid.table and grid.methods.
        #[arg(long, value_name = "N")]
        table: Option<usize>,
        /// Repeats per trained row, overriding grid.repeats.
        #[arg(long, value_name = "R")]
        repeats: Option<usize>,
    },
    /// Re-render a stored grid.json or run record.json as markdown and CSV.
    Report {
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// A grid.json or record.json file, or a directory holding one.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

fn defaults_help() -> String {
    format!(
        "Worker threads: set {WORKERS_ENV} (default: all cores). Outputs do not depend on it.\n\
         Exit codes: 0 success, 2 usage or config error, 3 numeric failure (divergence, \
         failed audit), 4 I/O or file-format error.\n\n\
         Config defaults (every key may be omitted):\n\n{}",
        config::CliConfig::default().to_toml()
    )
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_workers()?;
    match cli.command {
        Command::Generate { common } => {
            commands::generate(common.config.as_deref(), &common.out, common.seed)
        }
        Command::Train { common, data } => commands::train(
            common.config.as_deref(),
            data.dataset.as_deref(),
            &common.out,
            common.seed,
        ),
        Command::Eval {
            common,
            data,
            checkpoint,
            split,
            dtw,
        } => commands::eval(
            common.config.as_deref(),
            data.dataset.as_deref(),
            &checkpoint,
            match split {
                SplitArg::Dev => awe_core::data::Split::Dev,
                SplitArg::Test => awe_core::data::Split::Test,
            },
            dtw,
            &common.out,
            common.seed,
        ),
        Command::GradCheck { common } => {
            commands::grad_check(common.config.as_deref(), &common.out, common.seed)
        }
        Command::Grid {
            common,
            data,
            table,
            repeats,
        } => commands::grid(
            common.config.as_deref(),
            data.dataset.as_deref(),
            &common.out,
            common.seed,
            table,
            repeats,
        ),
        Command::Report { out, input } => commands::report(&input, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
