//! Experiment orchestration behind the command-line tool: configuration,
//! the full simulation pipeline, the benchmark tables and offline access to
//! persisted stores.

mod bench;
mod config;
mod offline;
mod simulate;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{bench, MetricRow, MetricTable, METRIC_HEADER};
pub use config::{BenchSpec, Injection, KnowledgeConfig, SimConfig};
pub use offline::{classify_offline, decision_line, inspect};
pub use simulate::{administer, simulate, HealEvent, NodeSummary, Summary};

use crate::exchange::ExchangeError;
use crate::fault::FaultError;
use crate::heal::HealError;
use crate::model::{CodecError, ModelError};
use crate::sim::SimError;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: record {line}: {reason}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error(transparent)]
    Heal(#[from] HealError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 3 for damaged
    /// stores or records, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::BadRecord { .. } => 3,
            HarnessError::Store(e) if e.is_corruption() => 3,
            HarnessError::Fault(FaultError::Corrupt { .. }) => 3,
            HarnessError::Exchange(ExchangeError::InvalidConfig(_)) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}
