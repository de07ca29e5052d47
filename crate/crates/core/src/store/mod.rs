//! Knowledge stores: per-node DSTs, the global domain knowledge, incremental
//! deltas between store versions, and their on-disk form.

mod delta;
mod dk;
mod dst;
mod equivalence;
mod persist;

use std::path::PathBuf;

pub use delta::Delta;
pub use dk::{build_dk, build_dk_metered, refresh_from_dk, DomainKnowledge, DEFAULT_DK_THRESHOLD};
pub use dst::{Dst, DstEntry, EntryId, CHANGE_LOG_WINDOW};
pub use equivalence::{key_overlap, merge_equivalent, MergePolicy};
pub use persist::{
    dk_from_text, dk_to_text, dst_from_text, dst_to_text, load_dk, load_dst, save_dk, save_dst,
};

use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no entry {0}")]
    UnknownEntry(EntryId),
    #[error("entry {0} already exists")]
    DuplicateEntry(EntryId),
    #[error("version {requested} is ahead of the store (at {current})")]
    FutureVersion { requested: u64, current: u64 },
    #[error("version {requested} is older than the change-log (oldest {oldest}); send a snapshot")]
    SnapshotRequired { requested: u64, oldest: u64 },
    #[error("delta starts at version {base} but the replica is at {have}")]
    VersionMismatch { have: u64, base: u64 },
    #[error("domain knowledge is immature ({sources} of {required} sources)")]
    ImmatureDk { sources: usize, required: usize },
    #[error("domain knowledge needs at least one source store")]
    NoSources,
    #[error("record {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl StoreError {
    /// The store content itself is unreadable (as opposed to an I/O failure
    /// or a protocol error).
    pub fn is_corruption(&self) -> bool {
        matches!(self, StoreError::Corrupt { .. })
    }
}

/// Folds a new observation into an equivalent ST: values widen, counts add.
pub(crate) fn combine_observation(
    a: &crate::model::SignatureTrace,
    b: &crate::model::SignatureTrace,
    policy: MergePolicy,
) -> crate::model::SignatureTrace {
    equivalence::combine(a, b, equivalence::Counting::Add, policy.widen)
}
