//! Per-node distributed signature-trace store (DST).

use std::cmp::Reverse;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::delta::Delta;
use super::equivalence::{absorb_into, cluster, Candidate, Counting, Features, MergePolicy};
use super::StoreError;
use crate::meter::WorkMeter;
use crate::model::{st_to_record, FixId, NodeId, SignatureTrace};

/// Number of versions kept in the change-log; older requests get a snapshot.
pub const CHANGE_LOG_WINDOW: usize = 64;

/// Stable identifier of a DST entry, local to the store that assigned it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntryId(pub u64);

impl fmt::Display for EntryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct DstEntry {
    id: EntryId,
    st: Arc<SignatureTrace>,
    record: Arc<str>,
    features: Arc<Features>,
}

impl PartialEq for DstEntry {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.record == other.record
    }
}

impl Eq for DstEntry {}

impl DstEntry {
    pub(crate) fn new(id: EntryId, st: SignatureTrace) -> Self {
        Self::from_candidate(id, Candidate::new(None::<EntryId>, st))
    }

    fn from_candidate<T>(id: EntryId, c: Candidate<T>) -> Self {
        let record = c.record.unwrap_or_else(|| st_to_record(&c.st).into());
        Self {
            id,
            st: c.st,
            record,
            features: c.features,
        }
    }

    pub(crate) fn candidate(&self, tag: Option<EntryId>) -> Candidate<EntryId> {
        Candidate {
            tag,
            st: self.st.clone(),
            features: self.features.clone(),
            record: Some(self.record.clone()),
        }
    }

    pub(crate) fn shared_st(&self) -> &Arc<SignatureTrace> {
        &self.st
    }

    pub fn id(&self) -> EntryId {
        self.id
    }

    pub fn st(&self) -> &SignatureTrace {
        &self.st
    }

    /// Canonical record line of the entry's ST.
    pub fn record(&self) -> &str {
        &self.record
    }

    fn rank_key(&self) -> (Reverse<u64>, &str) {
        (Reverse(self.st.occurrences().total()), &*self.record)
    }
}

/// A node's ranked, size-bounded and versioned collection of generalized STs.
///
/// Entries are kept in rank order: total occurrences descending, ties broken
/// by the canonical record text. When the store outgrows its threshold the
/// last entry in that order is evicted.
#[derive(Debug, Clone)]
pub struct Dst {
    node: NodeId,
    threshold: usize,
    version: u64,
    next_id: u64,
    policy: MergePolicy,
    entries: Vec<DstEntry>,
    log: VecDeque<Delta>,
}

impl Dst {
    pub fn new(node: impl Into<NodeId>, threshold: usize) -> Self {
        Self::with_policy(node, threshold, MergePolicy::default())
    }

    pub fn with_policy(node: impl Into<NodeId>, threshold: usize, policy: MergePolicy) -> Self {
        Self {
            node: node.into(),
            threshold: threshold.max(1),
            version: 0,
            next_id: 0,
            policy,
            entries: Vec::new(),
            log: VecDeque::new(),
        }
    }

    pub(crate) fn from_parts(
        node: NodeId,
        threshold: usize,
        version: u64,
        next_id: u64,
        policy: MergePolicy,
        entries: Vec<DstEntry>,
    ) -> Self {
        Self {
            node,
            threshold: threshold.max(1),
            version,
            next_id,
            policy,
            entries,
            log: VecDeque::new(),
        }
    }

    pub fn node(&self) -> &NodeId {
        &self.node
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn policy(&self) -> &MergePolicy {
        &self.policy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in rank order.
    pub fn entries(&self) -> &[DstEntry] {
        debug_assert!(
            self.is_canonical(),
            "DST {} lost canonical order",
            self.node
        );
        &self.entries
    }

    pub fn sts(&self) -> impl Iterator<Item = &SignatureTrace> {
        self.entries().iter().map(|e| &*e.st)
    }

    pub fn get(&self, id: EntryId) -> Option<&DstEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Oldest version a delta can still be computed from.
    pub fn oldest_delta_base(&self) -> u64 {
        self.log.front().map_or(self.version, |d| d.from())
    }

    pub fn is_canonical(&self) -> bool {
        self.entries.len() <= self.threshold
            && self
                .entries
                .windows(2)
                .all(|w| w[0].rank_key() < w[1].rank_key())
            && self.entries.iter().all(|e| e.st.is_canonical())
    }

    /// Same entries in the same order, ignoring node, ids and version.
    pub fn content_eq(&self, other: &Dst) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.record == b.record)
    }

    /// A copy without change history, as shipped to peers.
    pub fn snapshot(&self) -> Dst {
        Dst {
            log: VecDeque::new(),
            ..self.clone()
        }
    }

    /// Records one run's ST. Returns whether the store changed.
    pub fn merge_st(&mut self, st: SignatureTrace) -> bool {
        self.merge_st_metered(st, &mut WorkMeter::new())
    }

    pub fn merge_st_metered(&mut self, st: SignatureTrace, meter: &mut WorkMeter) -> bool {
        debug_assert!(st.is_canonical());
        meter.merges += 1;
        let mut groups: Vec<Candidate<EntryId>> = self
            .entries
            .iter()
            .map(|e| e.candidate(Some(e.id)))
            .collect();
        let item = Candidate::new(None, st);

        // Best match: largest key overlap, earliest in rank order on ties.
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in groups.iter().enumerate() {
            meter.comparisons += 1;
            if g.equivalent(&item, &self.policy) {
                let ov = g.overlap(&item);
                if best.is_none_or(|(_, b)| ov > b) {
                    best = Some((i, ov));
                }
            }
        }
        meter.widenings += item.st.signature().len() as u64;
        match best {
            Some((i, _)) => absorb_into(&mut groups, i, &item, Counting::Add, &self.policy, meter),
            None => groups.push(item),
        }
        self.commit(groups)
    }

    /// Folds a peer's store into this one. Equivalent entries are joined
    /// (the more general value wins, per-origin counts take the maximum), the
    /// rest are inserted, and the result is pruned to the threshold.
    pub fn merge_dst(&mut self, remote: &Dst) -> bool {
        self.merge_dst_metered(remote, &mut WorkMeter::new())
    }

    pub fn merge_dst_metered(&mut self, remote: &Dst, meter: &mut WorkMeter) -> bool {
        meter.merges += 1;
        let mut pool: Vec<(&DstEntry, bool)> = self
            .entries
            .iter()
            .map(|e| (e, false))
            .chain(remote.entries.iter().map(|e| (e, true)))
            .collect();
        // Order depends only on content, which makes the merge commutative.
        pool.sort_by(|(a, ra), (b, rb)| a.record.cmp(&b.record).then(ra.cmp(rb)));
        let items = pool
            .into_iter()
            .map(|(e, remote)| e.candidate((!remote).then_some(e.id)))
            .collect();
        let groups = cluster(items, Counting::Join, &self.policy, meter);
        self.commit(groups)
    }

    /// Counts one trial of `fix` against the entry's attached statistics.
    pub fn record_fix_outcome(
        &mut self,
        id: EntryId,
        fix: &FixId,
        succeeded: bool,
    ) -> Result<(), StoreError> {
        let entry = self.get(id).ok_or(StoreError::UnknownEntry(id))?;
        let mut st = SignatureTrace::clone(&entry.st);
        st.record_fix_outcome(fix, succeeded)?;
        self.replace_entry(id, st);
        Ok(())
    }

    /// Replaces one entry's ST in place (re-ranked, versioned).
    pub(crate) fn replace_entry(&mut self, id: EntryId, st: SignatureTrace) -> bool {
        let groups = self
            .entries
            .iter()
            .map(|e| {
                if e.id == id {
                    Candidate::new(Some(e.id), st.clone())
                } else {
                    e.candidate(Some(e.id))
                }
            })
            .collect();
        self.commit(groups)
    }

    /// Replaces all entries at once; ids present in `groups` are kept, new
    /// entries get fresh ids after pruning.
    pub(crate) fn commit(&mut self, groups: Vec<Candidate<EntryId>>) -> bool {
        let mut staged: Vec<(Option<EntryId>, DstEntry)> = groups
            .into_iter()
            .map(|c| {
                let tag = c.tag;
                (
                    tag,
                    DstEntry::from_candidate(tag.unwrap_or(EntryId(u64::MAX)), c),
                )
            })
            .collect();
        staged.sort_by(|a, b| a.1.rank_key().cmp(&b.1.rank_key()));
        staged.truncate(self.threshold);
        let mut next_id = self.next_id;
        let new_entries: Vec<DstEntry> = staged
            .into_iter()
            .map(|(tag, mut e)| {
                if tag.is_none() {
                    e.id = EntryId(next_id);
                    next_id += 1;
                }
                e
            })
            .collect();

        let delta = Delta::between(self.version, &self.entries, &new_entries);
        if delta.is_empty() {
            return false;
        }
        self.next_id = next_id;
        self.entries = new_entries;
        self.version += 1;
        self.push_log(delta);
        true
    }

    fn push_log(&mut self, delta: Delta) {
        self.log.push_back(delta);
        while self.log.len() > CHANGE_LOG_WINDOW {
            self.log.pop_front();
        }
    }

    /// Changes since version `since`, composed into one delta.
    pub fn delta_since(&self, since: u64) -> Result<Delta, StoreError> {
        if since > self.version {
            return Err(StoreError::FutureVersion {
                requested: since,
                current: self.version,
            });
        }
        if since == self.version {
            return Ok(Delta::empty(since));
        }
        let oldest = self.oldest_delta_base();
        if since < oldest {
            return Err(StoreError::SnapshotRequired {
                requested: since,
                oldest,
            });
        }
        let steps: Vec<&Delta> = self.log.iter().filter(|d| d.from() >= since).collect();
        Ok(Delta::compose(since, self.version, &steps))
    }

    /// Applies a delta produced by [`Dst::delta_since`] on the source store.
    /// The replica must be at exactly the delta's base version.
    pub fn apply_delta(&mut self, delta: &Delta) -> Result<(), StoreError> {
        if delta.from() != self.version {
            return Err(StoreError::VersionMismatch {
                have: self.version,
                base: delta.from(),
            });
        }
        if delta.to() == delta.from() {
            return Ok(());
        }
        let mut by_id: BTreeMap<EntryId, DstEntry> =
            self.entries.iter().map(|e| (e.id, e.clone())).collect();
        for id in delta.removed() {
            by_id.remove(id).ok_or(StoreError::UnknownEntry(*id))?;
        }
        for (id, st) in delta.updated() {
            let slot = by_id.get_mut(id).ok_or(StoreError::UnknownEntry(*id))?;
            *slot = DstEntry::new(*id, SignatureTrace::clone(st));
        }
        for (id, st) in delta.added() {
            if by_id
                .insert(*id, DstEntry::new(*id, SignatureTrace::clone(st)))
                .is_some()
            {
                return Err(StoreError::DuplicateEntry(*id));
            }
        }
        let mut entries: Vec<DstEntry> = by_id.into_values().collect();
        entries.sort_by(|a, b| a.rank_key().cmp(&b.rank_key()));
        let max_id = entries.iter().map(|e| e.id.0 + 1).max().unwrap_or(0);
        self.next_id = self.next_id.max(max_id);
        self.entries = entries;
        self.version = delta.to();
        self.push_log(delta.clone());
        Ok(())
    }

    /// Replaces the whole content with a snapshot of another store, keeping
    /// this store's identity. Used by replicas on full-state transfer.
    pub fn install_snapshot(&mut self, snapshot: &Dst) {
        self.entries = snapshot.entries.clone();
        self.version = snapshot.version;
        self.next_id = snapshot.next_id;
        self.threshold = snapshot.threshold;
        self.policy = snapshot.policy;
        self.log.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityCategory, EntityKey, GeneralizedValue, Shape};

    fn k(p: &str) -> EntityKey {
        EntityKey::dotted(EntityCategory::FieldValue, p)
    }

    fn st(node: &str, run: u64, path: &str, v: i64) -> SignatureTrace {
        SignatureTrace::builder(node, run)
            .calls([path])
            .entity(k(path), v)
            .build()
            .unwrap()
    }

    #[test]
    fn merge_into_empty() {
        let mut d = Dst::new("n0", 8);
        assert!(d.merge_st(st("n0", 0, "a", 1)));
        assert_eq!(d.len(), 1);
        assert_eq!(d.version(), 1);
        assert_eq!(d.entries()[0].st().occurrences().total(), 1);
    }

    #[test]
    fn same_st_twice_counts_twice() {
        let mut d = Dst::new("n0", 8);
        d.merge_st(st("n0", 0, "a", 1));
        d.merge_st(st("n0", 0, "a", 1));
        assert_eq!(d.len(), 1);
        assert_eq!(d.entries()[0].st().occurrences().total(), 2);
        assert_eq!(d.version(), 2);
    }

    #[test]
    fn least_ranked_entry_is_evicted() {
        let mut d = Dst::new("n0", 2);
        for _ in 0..3 {
            d.merge_st(st("n0", 0, "a", 1));
        }
        for _ in 0..2 {
            d.merge_st(st("n0", 0, "b", 1));
        }
        d.merge_st(st("n0", 0, "c", 1));
        let counts: Vec<u64> = d.sts().map(|s| s.occurrences().total()).collect();
        assert_eq!(counts, [3, 2]);
        assert!(d.sts().all(|s| s.trace().events[0].method.as_str() != "c"));
    }

    #[test]
    fn merge_dst_identity_and_idempotence() {
        let mut d = Dst::new("n0", 8);
        d.merge_st(st("n0", 0, "a", 1));
        d.merge_st(st("n0", 1, "b", 2));
        let v = d.version();
        let before = d.clone();
        assert!(!d.merge_dst(&Dst::new("n1", 8)));
        assert_eq!(d.version(), v);
        assert!(!d.merge_dst(&before));
        assert!(d.content_eq(&before));
        assert_eq!(d.version(), v);
    }

    #[test]
    fn merge_dst_takes_more_general_value() {
        let mut local = Dst::new("n0", 8);
        local.merge_st(st("n0", 0, "a", 5));
        let mut remote = Dst::new("n1", 8);
        remote.merge_st(
            SignatureTrace::builder("n1", 0)
                .calls(["a"])
                .entity_value(k("a"), GeneralizedValue::range(3, 9))
                .build()
                .unwrap(),
        );
        local.merge_dst(&remote);
        assert_eq!(local.len(), 1);
        let e = &local.entries()[0];
        assert_eq!(
            e.st().signature()[0].value.shape(),
            &Shape::Range { lo: 3, hi: 9 }
        );
        assert_eq!(e.st().occurrences().total(), 2);
    }

    #[test]
    fn delta_from_current_is_empty_and_single_step_is_exact() {
        let mut d = Dst::new("n0", 8);
        d.merge_st(st("n0", 0, "a", 1));
        assert!(d.delta_since(d.version()).unwrap().is_empty());
        let v = d.version();
        d.merge_st(st("n0", 1, "b", 1));
        let delta = d.delta_since(v).unwrap();
        assert_eq!(delta.added().len(), 1);
        assert!(delta.updated().is_empty() && delta.removed().is_empty());
    }

    #[test]
    fn old_version_needs_snapshot() {
        let mut d = Dst::new("n0", 4);
        for i in 0..(CHANGE_LOG_WINDOW as i64 + 5) {
            d.merge_st(st("n0", 0, "a", i));
        }
        assert!(matches!(
            d.delta_since(0),
            Err(StoreError::SnapshotRequired { .. })
        ));
        assert!(d.delta_since(d.oldest_delta_base()).is_ok());
    }

    #[test]
    fn fix_outcomes_are_versioned() {
        let mut d = Dst::new("n0", 4);
        d.merge_st(
            SignatureTrace::builder("n0", 0)
                .calls(["a"])
                .fault("io")
                .fix("f", 0, 0)
                .build()
                .unwrap(),
        );
        let id = d.entries()[0].id();
        let v = d.version();
        d.record_fix_outcome(id, &"f".into(), true).unwrap();
        assert_eq!(d.version(), v + 1);
        assert_eq!(d.entries()[0].st().fix(&"f".into()).unwrap().successes, 1);
        assert!(d.record_fix_outcome(id, &"zzz".into(), true).is_err());
    }
}
