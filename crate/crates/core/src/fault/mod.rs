//! Fault models and the similarity machinery around them: match categories,
//! the weighted fault graph with family-tree refinement, `classify` and
//! `find_fix`.

mod classify;
mod db;
mod graph;
mod kinds;
mod matching;
mod model;

use std::path::PathBuf;

pub use classify::{classify, classify_as, Classification, Decision};
pub use db::{db_from_text, db_to_text, load_db, save_db, FaultModelDb};
pub use graph::{
    rebuild_graph, refine_family, EdgeKind, FaultModelGraph, GraphEdge, GraphNode, FAMILY_FACTOR,
};
pub use kinds::{FaultKind, KindForest};
pub use matching::{
    match_category, match_category_metered, MatchCategory, MatchParams, MatchResult,
};
pub use model::{find_fix, FaultModel};

use crate::model::{FaultId, FixId, KindId, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum FaultError {
    #[error("kind `{0}` declared twice")]
    DuplicateKind(KindId),
    #[error("kind `{kind}` names unknown parent `{parent}`")]
    UnknownParent { kind: KindId, parent: KindId },
    #[error("kind `{0}` is its own ancestor")]
    KindCycle(KindId),
    #[error("unknown kind `{0}`")]
    UnknownKind(KindId),
    #[error("fault model `{0}` already exists")]
    DuplicateModel(FaultId),
    #[error("no fault model `{0}`")]
    UnknownModel(FaultId),
    #[error("fault model `{0}` has no fixes")]
    NoFixes(FaultId),
    #[error("fix `{0}` is not attached")]
    UnattachedFix(FixId),
    #[error("fix `{0}` has more successes than attempts")]
    InvalidFixStats(FixId),
    #[error("a tagged ST of `{0}` carries another outcome")]
    Mislabeled(FaultId),
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
