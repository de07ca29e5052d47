//! Append-only escalation log, one JSON record per line.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FixTrial, HealError};
use crate::model::{decode, encode, FaultId, NodeId};

/// What the administrator gets when healing gives up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationRecord {
    pub node: NodeId,
    pub run: u64,
    pub fault: FaultId,
    pub reason: String,
    /// The failing ST as a store record.
    pub st: String,
    pub tried: Vec<FixTrial>,
    /// Saved application state.
    pub state: String,
    pub elapsed: u64,
}

/// Escalation records kept in memory and, when a path is set, appended to a
/// file as they arrive.
#[derive(Debug, Clone, Default)]
pub struct EscalationLog {
    path: Option<PathBuf>,
    records: Vec<EscalationRecord>,
}

impl EscalationLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn to_file(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
            records: Vec::new(),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[EscalationRecord] {
        &self.records
    }

    pub fn append(&mut self, record: EscalationRecord) -> Result<(), HealError> {
        if let Some(path) = &self.path {
            let io = |source| HealError::Io {
                path: path.clone(),
                source,
            };
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(io)?;
            }
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io)?;
            writeln!(f, "{}", encode(&record)).map_err(io)?;
        }
        self.records.push(record);
        Ok(())
    }

    /// Reads a log file back.
    pub fn read(path: impl AsRef<Path>) -> Result<Vec<EscalationRecord>, HealError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| HealError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                decode(l).map_err(|e| HealError::Io {
                    path: path.to_path_buf(),
                    source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
                })
            })
            .collect()
    }
}
