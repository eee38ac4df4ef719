//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort,
//! 4 I/O or file-format error.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{execute_run, RunReport};
pub use config::{ConfigError, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "travelwave", version, about = "Learn traveling-wave profiles and wave speeds with neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML run configuration
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in configuration; append `-full` for the full-size variant
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Args, Debug)]
struct RunFlags {
    /// Output directory (overrides `out_dir`)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for sampling and initialization
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one configuration
    Train {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Tabulate profiles from a checkpoint
    Eval {
        checkpoint: PathBuf,
        /// Configuration the checkpoint was trained with [default: config.toml beside it]
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Evaluation grid as lo:hi:n
        #[arg(long, default_value = "-10:10:201", allow_hyphen_values = true)]
        grid: String,
        /// Also write SVG plots
        #[arg(long)]
        svg: bool,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Speed bounds and classical speed estimates
    Oracle {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Train over the grid declared in `[sweep]`
    Sweep {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Plot CSV columns as SVG
    Plot {
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// x column [default: first column]
        #[arg(long)]
        x: Option<String>,
        /// Comma-separated y columns [default: all others]
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        quiet: bool,
    },
}

fn load(source: &Source, flags: &RunFlags) -> Result<RunConfig, CliError> {
    let mut cfg = match (&source.config, &source.preset) {
        (Some(path), _) => RunConfig::from_path(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
    };
    if let Some(seed) = flags.seed {
        cfg = cfg.with_seed(seed)?;
    }
    if let Some(epochs) = flags.epochs {
        cfg = cfg.with_epochs(epochs)?;
    }
    if let Some(out) = &flags.out {
        cfg = cfg.with_out_dir(out)?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { source, flags } => commands::cmd_train(&load(&source, &flags)?, flags.quiet),
        Command::Sweep { source, flags } => commands::cmd_sweep(&load(&source, &flags)?, flags.quiet),
        Command::Oracle { source, flags } => commands::cmd_oracle(&load(&source, &flags)?, flags.quiet),
        Command::Eval { checkpoint, config, grid, svg, out, quiet } => {
            commands::cmd_eval(&checkpoint, config.as_deref(), &grid, svg, out.as_deref(), quiet).map(|_| ())
        }
        Command::Plot { input, out, x, y, log_y, quiet } => {
            commands::cmd_plot(&input, out.as_deref(), x.as_deref(), y.as_deref(), log_y, quiet).map(|_| ())
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["travelwave"]), 2);
        assert_eq!(run(["travelwave", "train"]), 2);
        assert_eq!(run(["travelwave", "train", "--config", "a.toml", "--preset", "ks-eps0"]), 2);
        assert_eq!(run(["travelwave", "--help"]), 0);
    }

    #[test]
    fn config_errors_exit_2_and_missing_files_exit_4() {
        assert_eq!(run(["travelwave", "train", "--preset", "no-such", "--quiet"]), 2);
        assert_eq!(run(["travelwave", "train", "--config", "/nonexistent/x.toml", "--quiet"]), 4);
        assert_eq!(run(["travelwave", "sweep", "--preset", "ks-eps0", "--quiet"]), 2);
    }
}
