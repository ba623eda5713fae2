//! The `kbpt` command line: data generation, training, evaluation,
//! execution and pruning statistics. Machine output goes to stdout, logs
//! to stderr, artifacts into a run directory.

mod cli;
mod commands;
mod config;

use std::path::{Path, PathBuf};

use crate::executor::ExecError;
use crate::kb::KbError;
use crate::program::ProgramParseError;
use crate::pruning::PruneError;
use crate::sketch::ModelError;
use crate::train::{DataError, SynthError, TrainError};

pub use cli::{Cli, Command, TrainArgs};
pub use commands::{dispatch, prune_rows, PruneRow};
pub use config::{Inputs, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing input file {0}")]
    Missing(PathBuf),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("{0}")]
    Program(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(TrainError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Config(_) => 3,
            HarnessError::Io { .. } | HarnessError::Missing(_) => 4,
            HarnessError::Data(_) => 5,
            HarnessError::Kb(_) => 6,
            HarnessError::Program(_) => 7,
            HarnessError::Model(_) | HarnessError::Train(_) => 8,
        }
    }

    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io { path: path.to_path_buf(), source }
    }
}

impl From<TrainError> for HarnessError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => HarnessError::Config(m),
            TrainError::EmptyDataset | TrainError::Example { .. } => HarnessError::Data(e.to_string()),
            TrainError::Exec(_) => HarnessError::Program(e.to_string()),
            TrainError::Model(m) => HarnessError::Model(m),
            e => HarnessError::Train(e),
        }
    }
}

impl From<DataError> for HarnessError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { path, source } => HarnessError::Io { path: path.into(), source },
            e => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for HarnessError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Config(m) => HarnessError::Config(m),
            SynthError::Kb(k) => HarnessError::Kb(k),
            e => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<ProgramParseError> for HarnessError {
    fn from(e: ProgramParseError) -> Self {
        HarnessError::Program(e.to_string())
    }
}

impl From<ExecError> for HarnessError {
    fn from(e: ExecError) -> Self {
        HarnessError::Program(e.to_string())
    }
}

impl From<PruneError> for HarnessError {
    fn from(e: PruneError) -> Self {
        HarnessError::Program(e.to_string())
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser as _;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
