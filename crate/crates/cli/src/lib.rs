//! Experiment harness around `dcs-core`: configuration files, Monte Carlo sweeps over
//! measurement allocations, single-instance reports and tabular output.

use std::path::{Path, PathBuf};

use dcs_core::DcsError;

pub mod config;
pub mod emit;
pub mod experiment;
pub mod report;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output error: {0}")]
    Output(String),
    #[error("{0}")]
    Core(#[from] DcsError),
    #[error("{0} recovery-guarantee violation(s)")]
    Assertion(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// 2 for bad input, 3 for a failed assertion run, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Core(_) => 2,
            Self::Assertion(_) => 3,
            Self::Io { .. } | Self::Output(_) => 1,
        }
    }
}
