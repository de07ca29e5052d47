//! The simulated target application and its fault injector.
//!
//! A small request server (accept, dispatch, then a database, file or network
//! handler) emits probe events for every call and sampled value. Faults are
//! injected at a chosen run and position; five recovery actions exist, and a
//! root-cause table decides which of them actually repair which fault.

mod app;
mod faults;
mod model;

pub use app::{
    ActiveFault, AppState, Checkpoint, ExecutionPoint, FailedRun, RecoveryReport, SimApp,
};
pub use faults::{
    fix_target, reference_kinds, FaultSpec, FaultType, RootCauseTable, Trigger, CLEAR_MEMORY,
    FIX_CATALOG, PURGE_DISK, REOPEN_CONNECTION, RESTART_COMPONENT, RESTORE_CONFIG,
};
pub use model::{AppModel, Handler, Resource, WorkloadSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("invalid application model: {0}")]
    InvalidModel(String),
    #[error("checkpoint cannot be restored: {0}")]
    Checkpoint(String),
}
