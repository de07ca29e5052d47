//! Incremental change sets between two versions of a DST.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dst::{DstEntry, EntryId};
use crate::model::SignatureTrace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    from: u64,
    to: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    added: Vec<(EntryId, Arc<SignatureTrace>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    updated: Vec<(EntryId, Arc<SignatureTrace>)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    removed: Vec<EntryId>,
}

#[derive(Clone)]
enum Change {
    Upsert(Arc<SignatureTrace>),
    Removed,
}

impl Delta {
    pub fn empty(version: u64) -> Self {
        Self {
            from: version,
            to: version,
            added: Vec::new(),
            updated: Vec::new(),
            removed: Vec::new(),
        }
    }

    pub fn from(&self) -> u64 {
        self.from
    }

    pub fn to(&self) -> u64 {
        self.to
    }

    pub fn added(&self) -> &[(EntryId, Arc<SignatureTrace>)] {
        &self.added
    }

    pub fn updated(&self) -> &[(EntryId, Arc<SignatureTrace>)] {
        &self.updated
    }

    pub fn removed(&self) -> &[EntryId] {
        &self.removed
    }

    /// True when the delta carries no entry changes.
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.updated.is_empty() && self.removed.is_empty()
    }

    /// Number of ST records carried.
    pub fn record_count(&self) -> usize {
        self.added.len() + self.updated.len()
    }

    /// The single-step delta from `old` (at `version`) to `new`.
    pub(crate) fn between(version: u64, old: &[DstEntry], new: &[DstEntry]) -> Delta {
        let old_map: BTreeMap<EntryId, &DstEntry> = old.iter().map(|e| (e.id(), e)).collect();
        let new_map: BTreeMap<EntryId, &DstEntry> = new.iter().map(|e| (e.id(), e)).collect();
        let mut d = Delta {
            from: version,
            to: version + 1,
            added: Vec::new(),
            updated: Vec::new(),
            removed: Vec::new(),
        };
        for (id, e) in &new_map {
            match old_map.get(id) {
                None => d.added.push((*id, e.shared_st().clone())),
                Some(o) if o.record() != e.record() => d.updated.push((*id, e.shared_st().clone())),
                Some(_) => {}
            }
        }
        d.removed = old_map
            .keys()
            .filter(|id| !new_map.contains_key(id))
            .copied()
            .collect();
        d
    }

    /// Composes consecutive single-step deltas `from -> to` into one.
    pub(crate) fn compose(from: u64, to: u64, steps: &[&Delta]) -> Delta {
        // id -> (existed at `from`, latest change)
        let mut touched: BTreeMap<EntryId, (bool, Change)> = BTreeMap::new();
        for step in steps {
            for (id, st) in &step.added {
                touched
                    .entry(*id)
                    .and_modify(|(_, c)| *c = Change::Upsert(st.clone()))
                    .or_insert((false, Change::Upsert(st.clone())));
            }
            for (id, st) in &step.updated {
                touched
                    .entry(*id)
                    .and_modify(|(_, c)| *c = Change::Upsert(st.clone()))
                    .or_insert((true, Change::Upsert(st.clone())));
            }
            for id in &step.removed {
                touched
                    .entry(*id)
                    .and_modify(|(_, c)| *c = Change::Removed)
                    .or_insert((true, Change::Removed));
            }
        }
        let mut d = Delta::empty(from);
        d.to = to;
        for (id, (existed, change)) in touched {
            match (existed, change) {
                (false, Change::Upsert(st)) => d.added.push((id, st)),
                (true, Change::Upsert(st)) => d.updated.push((id, st)),
                (true, Change::Removed) => d.removed.push(id),
                (false, Change::Removed) => {}
            }
        }
        d
    }
}
