//! Batch orchestration for the SU(2) quantum link model simulator:
//! configuration, ground-state runs and sweeps, checkpoints, record files,
//! analysis tasks and the self-check suite.

pub mod analyze;
pub mod checkpoint;
pub mod config;
pub mod ed_cmd;
pub mod output;
pub mod run;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Core(#[from] su2qlm::Error),
    #[error("computation failed: {0}")]
    Compute(String),
}

impl CliError {
    /// 1 for bad input, 2 for failures during computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(_) | CliError::Compute(_) => 2,
            _ => 1,
        }
    }
}
