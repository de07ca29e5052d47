//! Signatures, traces and signature-traces (STs): the atomic knowledge unit
//! and the distance measure everything else is built on.

mod codec;
mod distance;
mod ids;
mod signature;
mod st;
mod trace;
mod value;

pub use codec::{decode, encode, st_from_record, st_to_record, CodecError, FORMAT_VERSION};
pub use distance::{
    common_keys, distance, shared_pairs, signature_distance, trace_distance, DistanceWeights,
};
pub use ids::{FaultId, FixId, KindId, MethodId, NodeId};
pub use signature::{EntityCategory, EntityKey, Occurrences, SignatureEntity};
pub use st::{
    best_first, build_st, build_st_metered, AttachedFix, Outcome, Probe, ProbeEvent, RunMeta,
    RunRecord, SignatureTrace, StBuilder,
};
pub use trace::{lcs_len, Trace, TraceEvent};
pub use value::{widen, GeneralizedValue, Scalar, Shape, WidenPolicy};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("probe {index}: sequence number {seq} does not follow {prev}")]
    NonMonotoneSeq { index: usize, prev: u64, seq: u64 },
    #[error("call at seq {seq} jumps to depth {depth} (at most {limit} allowed)")]
    DepthJump { seq: u64, depth: u32, limit: u32 },
    #[error("terminal stack must be present exactly when the run faulted")]
    StackMismatch,
    #[error("key `{0}` sampled under two different categories")]
    CategoryConflict(String),
    #[error("key `{0}` appears twice in the signature")]
    DuplicateKey(String),
    #[error("signature is not in canonical order")]
    NotCanonical,
    #[error("stable signature-traces carry no fixes")]
    StableWithFixes,
    #[error("fix `{0}` has more successes than attempts")]
    InvalidFixStats(FixId),
    #[error("fix `{0}` is not attached")]
    UnattachedFix(FixId),
}
