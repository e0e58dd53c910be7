//! Campaign harness: corpus ingestion, batch attacks with per-item query
//! budgets, table-shaped reports, and an HTTP identification service speaking
//! the `/identify` wire protocol.

pub mod campaign;
pub mod corpus;
pub mod fixtures;
pub mod server;

use thiserror::Error;

use raf_core::attack::AttackError;
use raf_core::landmarks::LandmarkError;
use raf_core::oracle::OracleError;
use raf_core::warp::WarpError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error(transparent)]
    Landmarks(#[from] LandmarkError),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

impl HarnessError {
    /// Process exit code: 2 for usage/config problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Io(_) | HarnessError::Bind { .. } => 3,
            HarnessError::Landmarks(LandmarkError::Io(_)) => 3,
            HarnessError::Warp(WarpError::Io(_) | WarpError::Decode(_)) => 3,
            HarnessError::Oracle(OracleError::Manifest(_) | OracleError::Transport(_)) => 3,
            HarnessError::Corpus(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
