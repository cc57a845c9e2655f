use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dcs_cli::config::{ExperimentConfig, Mode};
use dcs_cli::emit::{emit, Format};
use dcs_cli::report::{self, RecoverConfig};
use dcs_cli::CliError;
use dcs_core::ensemble::LocationMatrix;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "dcs", version, about = "Measurement bounds and joint recovery for sparse signal ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Known,
    Unknown,
    BoundsOnly,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Known => Mode::Known,
            ModeArg::Unknown => Mode::Unknown,
            ModeArg::BoundsOnly => Mode::BoundsOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-subset slack tables and the minimal allocations for a location matrix.
    Analyze {
        /// JSON file with `{"N", "common", "innovations"}`.
        #[arg(long)]
        location: PathBuf,
        /// Comma-separated measurement counts, e.g. `2,1`.
        #[arg(long, value_delimiter = ',')]
        allocation: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dependency graph and maximum matching between values and measurements.
    Matching {
        #[arg(long)]
        location: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        allocation: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a Graphviz rendering here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Recover one ensemble from Gaussian measurements.
    Recover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo sweep over allocations and seeds.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        trials: Option<usize>,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Exit with status 3 if a guaranteed recovery outcome fails.
        #[arg(long)]
        assert: bool,
        /// Record per-trial wall time (output is then no longer reproducible).
        #[arg(long)]
        timing: bool,
        /// Write the per-allocation summary (and bound reports) as JSON here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_location(path: &Path) -> Result<LocationMatrix, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { location, allocation, out } => {
            let p = load_location(&location)?;
            write_json(&report::analyze(&p, allocation.as_deref())?, out.as_deref())
        }
        Command::Matching { location, allocation, out, dot } => {
            let p = load_location(&location)?;
            let rep = report::matching(&p, &allocation)?;
            if let Some(path) = dot {
                std::fs::write(&path, rep.graph.to_dot(Some(&rep.matching))).map_err(|e| CliError::io(&path, e))?;
            }
            write_json(&rep, out.as_deref())
        }
        Command::Recover { config, out } => {
            let cfg = RecoverConfig::from_json(&read(&config)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            write_json(&report::recover(&cfg)?, out.as_deref())
        }
        Command::Simulate { config, out, format, trials, seed, mode, assert, timing, summary } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            cfg.timing |= timing;
            let result = dcs_cli::experiment::run_experiment(&cfg)?;
            let format = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            if cfg.mode == Mode::BoundsOnly {
                write_json(&result.bounds, out.as_deref())?;
            } else {
                emit(&result.records, cfg.sensors(), format, out.as_deref())?;
            }
            for s in &result.summary {
                eprintln!(
                    "allocation {:?}: {}/{} unique, {} ambiguous, {} infeasible, {} refused (success rate {})",
                    s.allocation, s.unique, s.trials, s.ambiguous, s.infeasible, s.refused, s.success_rate
                );
            }
            if let Some(path) = summary {
                write_json(&serde_json::json!({ "summary": result.summary, "bounds": result.bounds }), Some(&path))?;
            }
            for v in &result.violations {
                eprintln!("violation: {v}");
            }
            if assert && !result.violations.is_empty() {
                return Err(CliError::Assertion(result.violations.len()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
