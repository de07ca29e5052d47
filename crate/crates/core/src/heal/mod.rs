//! Fix search for a failed run.
//!
//! When a run fails, the healer saves the application state, gathers fixes
//! from the local store and the fault models, and tries them one at a time.
//! After each failed trial the application is restored to the checkpoint.
//! Parts of the store that exactly match the failure are tried recursively
//! up to a depth bound, and partial matches become candidates chosen by
//! success rate and then distance. While the tick budget lasts, the healer
//! refreshes its store from peers and starts over. If all of that fails the
//! fault is escalated to the administrator through an append-only log.

mod engine;
mod escalation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{apply_fix, on_failure, Stability};
pub use escalation::{EscalationLog, EscalationRecord};

use crate::exchange::Cluster;
use crate::fault::{FaultError, FaultModel};
use crate::model::{FaultId, FixId, ModelError, SignatureTrace};
use crate::sim::SimError;
use crate::store::{refresh_from_dk, DomainKnowledge, Dst, EntryId, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealingConfig {
    /// Depth bound for trying fixes of store entries that are exact parts of
    /// the failure.
    pub max_depth: u32,
    /// Tick budget for one failure.
    pub time_limit: u64,
    /// How many candidates, by success rate, compete on distance.
    pub candidates: usize,
    /// Distance up to which a store entry counts as a partial match.
    pub eps: f64,
    /// Upper bound on fix trials for one failure.
    pub fix_attempt_cap: usize,
    /// Ticks one fix trial costs. A refresh costs the same.
    pub trial_ticks: u64,
}

impl Default for HealingConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            time_limit: 1000,
            candidates: 5,
            eps: 0.25,
            fix_attempt_cap: 32,
            trial_ticks: 10,
        }
    }
}

impl HealingConfig {
    pub fn validate(&self) -> Result<(), HealError> {
        let bad = |what: &str| Err(HealError::InvalidConfig(format!("{what} must be positive")));
        if self.max_depth == 0 {
            return bad("max-depth");
        }
        if self.time_limit == 0 {
            return bad("time-limit");
        }
        if self.candidates == 0 {
            return bad("candidates");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(HealError::InvalidConfig("eps must be in (0, 1)".into()));
        }
        if self.fix_attempt_cap == 0 {
            return bad("fix-attempt-cap");
        }
        if self.trial_ticks == 0 {
            return bad("trial-ticks");
        }
        Ok(())
    }
}

/// Where a tried fix came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "kebab-case")]
pub enum FixSource {
    /// Attached to a store entry.
    Store { entry: EntryId },
    /// Attached to a fault model, or borrowed by it from a sibling.
    Model { model: FaultId },
}

/// Which step of the search produced a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// A store entry matching the failure exactly, tried before anything else.
    Exact,
    /// The ranked fix list.
    List,
    /// A store entry that is an exact part of the failure.
    Part { depth: u32 },
    /// The closest of the best partial matches.
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixTrial {
    pub fix: FixId,
    pub source: FixSource,
    pub phase: Phase,
    pub stable: bool,
    /// Tick at which the trial finished.
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum HealResult {
    Healed { fix: FixId, attempts: usize },
    Escalated { record: Box<EscalationRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealingOutcome {
    pub result: HealResult,
    pub elapsed: u64,
    pub trials: Vec<FixTrial>,
    /// Distance evaluations spent matching.
    pub comparisons: u64,
    /// Deepest part-match recursion reached.
    pub depth_reached: u32,
    /// Store refreshes requested.
    pub refreshes: u32,
}

impl HealingOutcome {
    pub fn is_healed(&self) -> bool {
        matches!(self.result, HealResult::Healed { .. })
    }

    pub fn healing_fix(&self) -> Option<&FixId> {
        match &self.result {
            HealResult::Healed { fix, .. } => Some(fix),
            HealResult::Escalated { .. } => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum HealError {
    #[error("the application is already stable")]
    AlreadyStable,
    #[error("the failure record carries no fault")]
    NotAFault,
    #[error("invalid healing configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("escalation log {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// The store the healer reads, and how to get a fresher one.
pub trait Knowledge {
    fn dst(&self) -> &Dst;
    fn dst_mut(&mut self) -> &mut Dst;
    /// Pulls knowledge from elsewhere. Returns whether the store changed.
    fn refresh(&mut self) -> bool {
        false
    }
}

impl Knowledge for Dst {
    fn dst(&self) -> &Dst {
        self
    }

    fn dst_mut(&mut self) -> &mut Dst {
        self
    }
}

/// One node of a cluster: refreshing merges the peers' stores and, when
/// mature, the domain knowledge.
pub struct ClusterKnowledge<'a> {
    pub cluster: &'a mut Cluster,
    pub node: usize,
    pub dk: Option<&'a DomainKnowledge>,
}

impl Knowledge for ClusterKnowledge<'_> {
    fn dst(&self) -> &Dst {
        self.cluster.dst(self.node)
    }

    fn dst_mut(&mut self) -> &mut Dst {
        self.cluster.dst_mut(self.node)
    }

    fn refresh(&mut self) -> bool {
        let pulled = match self.cluster.pull(self.node) {
            Ok(changed) => changed,
            Err(e) => {
                tracing::warn!(node = self.node, "refresh from peers failed: {e}");
                false
            }
        };
        let from_dk = match self.dk {
            Some(dk) if dk.is_mature() => {
                refresh_from_dk(self.cluster.dst_mut(self.node), dk).unwrap_or(false)
            }
            _ => false,
        };
        pulled || from_dk
    }
}

/// Something with fixes and their success statistics.
pub trait FixCarrier {
    fn record_fix(&mut self, fix: &FixId, succeeded: bool) -> Result<(), HealError>;
}

impl FixCarrier for SignatureTrace {
    fn record_fix(&mut self, fix: &FixId, succeeded: bool) -> Result<(), HealError> {
        Ok(self.record_fix_outcome(fix, succeeded)?)
    }
}

impl FixCarrier for FaultModel {
    fn record_fix(&mut self, fix: &FixId, succeeded: bool) -> Result<(), HealError> {
        Ok(self.record_fix_outcome(fix, succeeded)?)
    }
}

/// Counts one more attempt of `fix`, and one more success if it worked.
pub fn update_success<C: FixCarrier>(
    mut carrier: C,
    fix: &FixId,
    succeeded: bool,
) -> Result<C, HealError> {
    carrier.record_fix(fix, succeeded)?;
    Ok(carrier)
}
