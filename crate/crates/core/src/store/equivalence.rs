//! When two STs describe the same scenario, and how they are folded together.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::meter::WorkMeter;
use crate::model::{
    widen, AttachedFix, EntityKey, FixId, MethodId, Outcome, SignatureEntity, SignatureTrace,
    WidenPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergePolicy {
    /// Minimum share of coinciding signature keys (`|A ∩ B| / |A ∪ B|`).
    pub key_overlap: f64,
    #[serde(flatten)]
    pub widen: WidenPolicy,
}

impl Default for MergePolicy {
    fn default() -> Self {
        Self {
            key_overlap: 0.8,
            widen: WidenPolicy::default(),
        }
    }
}

/// Share of signature keys the two STs have in common. Two empty signatures
/// overlap fully.
pub fn key_overlap(a: &SignatureTrace, b: &SignatureTrace) -> f64 {
    let ka: BTreeSet<&EntityKey> = a.keys().collect();
    let kb: BTreeSet<&EntityKey> = b.keys().collect();
    overlap_of(&ka, &kb)
}

fn overlap_of(ka: &BTreeSet<&EntityKey>, kb: &BTreeSet<&EntityKey>) -> f64 {
    let union = ka.union(kb).count();
    if union == 0 {
        return 1.0;
    }
    ka.intersection(kb).count() as f64 / union as f64
}

/// Same outcome, same method sequence after folding consecutive repeats, and
/// enough coinciding keys.
pub fn merge_equivalent(a: &SignatureTrace, b: &SignatureTrace, policy: &MergePolicy) -> bool {
    a.outcome() == b.outcome()
        && a.trace().collapsed_methods() == b.trace().collapsed_methods()
        && key_overlap(a, b) >= policy.key_overlap
}

/// How occurrence and fix counters combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Counting {
    /// Independent observations: counters add.
    Add,
    /// Replicas of the same knowledge: per-origin maximum.
    Join,
}

/// Folds `b` into `a`. Values are widened, counters combined per `counting`.
/// Symmetric in its arguments.
pub(crate) fn combine(
    a: &SignatureTrace,
    b: &SignatureTrace,
    counting: Counting,
    policy: WidenPolicy,
) -> SignatureTrace {
    let mut out = a.clone();
    out.meta = a.meta.clone().min(b.meta.clone());
    match counting {
        Counting::Add => out.occurrences.add(&b.occurrences),
        Counting::Join => out.occurrences.join(&b.occurrences),
    }

    let mut sig: BTreeMap<EntityKey, SignatureEntity> = a
        .signature
        .iter()
        .map(|e| (e.key.clone(), e.clone()))
        .collect();
    for e in &b.signature {
        match sig.get_mut(&e.key) {
            Some(mine) => {
                mine.value = widen(&mine.value, &e.value, policy);
                match counting {
                    Counting::Add => mine.occurrences.add(&e.occurrences),
                    Counting::Join => mine.occurrences.join(&e.occurrences),
                }
            }
            None => {
                sig.insert(e.key.clone(), e.clone());
            }
        }
    }
    out.signature = sig.into_values().collect();

    if a.trace != b.trace {
        out.trace = a.trace.collapsed().min(b.trace.collapsed());
    }

    let mut fixes: BTreeMap<FixId, AttachedFix> =
        a.fixes.iter().map(|f| (f.fix.clone(), f.clone())).collect();
    for f in &b.fixes {
        match fixes.get_mut(&f.fix) {
            Some(mine) => match counting {
                Counting::Add => {
                    mine.successes += f.successes;
                    mine.attempts += f.attempts;
                }
                Counting::Join => {
                    mine.successes = mine.successes.max(f.successes);
                    mine.attempts = mine.attempts.max(f.attempts);
                }
            },
            None => {
                fixes.insert(f.fix.clone(), f.clone());
            }
        }
    }
    out.fixes = fixes.into_values().collect();
    out.canonicalize();
    out
}

/// The parts of an ST that decide equivalence.
#[derive(Debug)]
pub(crate) struct Features {
    outcome: Outcome,
    collapsed: Vec<MethodId>,
    keys: BTreeSet<EntityKey>,
}

impl Features {
    pub fn of(st: &SignatureTrace) -> Self {
        Self {
            outcome: st.outcome().clone(),
            collapsed: st
                .trace()
                .collapsed_methods()
                .into_iter()
                .cloned()
                .collect(),
            keys: st.keys().cloned().collect(),
        }
    }
}

/// An ST with its equivalence-relevant features precomputed. Cloning is
/// cheap: the ST and its features are shared.
#[derive(Debug, Clone)]
pub(crate) struct Candidate<T> {
    pub tag: Option<T>,
    pub st: Arc<SignatureTrace>,
    pub features: Arc<Features>,
    /// Record text of `st` when already known; dropped on any change.
    pub record: Option<Arc<str>>,
}

impl<T: Ord + Clone> Candidate<T> {
    pub fn new(tag: Option<T>, st: SignatureTrace) -> Self {
        Self {
            tag,
            features: Arc::new(Features::of(&st)),
            st: Arc::new(st),
            record: None,
        }
    }

    pub fn equivalent(&self, other: &Candidate<T>, policy: &MergePolicy) -> bool {
        let (a, b) = (&*self.features, &*other.features);
        a.outcome == b.outcome
            && a.collapsed == b.collapsed
            && self.overlap(other) >= policy.key_overlap
    }

    pub fn overlap(&self, other: &Candidate<T>) -> f64 {
        let (a, b) = (&self.features.keys, &other.features.keys);
        let common = a.intersection(b).count();
        let union = a.len() + b.len() - common;
        if union == 0 {
            return 1.0;
        }
        common as f64 / union as f64
    }

    fn absorb(&mut self, other: &Candidate<T>, counting: Counting, policy: &MergePolicy) {
        let tag = match (&self.tag, &other.tag) {
            (Some(a), Some(b)) => Some(a.clone().min(b.clone())),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        let st = combine(&self.st, &other.st, counting, policy.widen);
        *self = Candidate::new(tag, st);
    }
}

/// Folds `item` into `groups[at]`, then keeps folding until no two groups are
/// equivalent to the one that changed.
pub(crate) fn absorb_into<T: Ord + Clone>(
    groups: &mut Vec<Candidate<T>>,
    at: usize,
    item: &Candidate<T>,
    counting: Counting,
    policy: &MergePolicy,
    meter: &mut WorkMeter,
) {
    groups[at].absorb(item, counting, policy);
    let mut i = at;
    loop {
        let mut hit = None;
        for j in 0..groups.len() {
            if j == i {
                continue;
            }
            meter.comparisons += 1;
            if groups[i].equivalent(&groups[j], policy) {
                hit = Some(j);
                break;
            }
        }
        let Some(j) = hit else { break };
        let (keep, gone) = if i < j { (i, j) } else { (j, i) };
        let other = groups.remove(gone);
        groups[keep].absorb(&other, counting, policy);
        i = keep;
    }
}

/// Greedy clustering: each item joins the first equivalent group in order.
/// The result is pairwise non-equivalent and depends only on the order of
/// `items`.
pub(crate) fn cluster<T: Ord + Clone>(
    items: Vec<Candidate<T>>,
    counting: Counting,
    policy: &MergePolicy,
    meter: &mut WorkMeter,
) -> Vec<Candidate<T>> {
    let mut groups: Vec<Candidate<T>> = Vec::new();
    for item in items {
        let mut found = None;
        for (i, g) in groups.iter().enumerate() {
            meter.comparisons += 1;
            if g.equivalent(&item, policy) {
                found = Some(i);
                break;
            }
        }
        match found {
            Some(i) => absorb_into(&mut groups, i, &item, counting, policy, meter),
            None => groups.push(item),
        }
    }
    groups
}
