//! Domain knowledge (DK): the global generalization built from many DSTs.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use super::dst::{Dst, EntryId};
use super::equivalence::{cluster, combine, Candidate, Counting, MergePolicy};
use super::StoreError;
use crate::meter::WorkMeter;
use crate::model::{st_to_record, NodeId, Occurrences, SignatureTrace};

/// Default entry cap for the DK; larger than any single node's DST.
pub const DEFAULT_DK_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainKnowledge {
    entries: Vec<SignatureTrace>,
    sources: usize,
    min_sources: usize,
    threshold: usize,
    policy: MergePolicy,
}

impl DomainKnowledge {
    pub(crate) fn from_parts(
        entries: Vec<SignatureTrace>,
        sources: usize,
        min_sources: usize,
        threshold: usize,
        policy: MergePolicy,
    ) -> Self {
        Self {
            entries,
            sources,
            min_sources,
            threshold,
            policy,
        }
    }

    pub fn entries(&self) -> &[SignatureTrace] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of DSTs folded in.
    pub fn source_count(&self) -> usize {
        self.sources
    }

    pub fn min_sources(&self) -> usize {
        self.min_sources
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn policy(&self) -> &MergePolicy {
        &self.policy
    }

    /// Enough sources have been merged for the DK to be authoritative.
    pub fn is_mature(&self) -> bool {
        self.sources >= self.min_sources
    }
}

// Occurrence counts a DST holds for its own node are independent observations
// and add up across sources; counts it holds for other nodes are replicas and
// are joined. Own counts are re-keyed per source before clustering so that the
// join keeps them apart, then folded back.
const OWN_MARK: char = '\u{1f}';

fn mark_occ(occ: &Occurrences, own: &NodeId, source: usize) -> Occurrences {
    let m = occ
        .iter()
        .map(|(n, c)| {
            let key = if n == own {
                NodeId::new(format!("{n}{OWN_MARK}{source}"))
            } else {
                n.clone()
            };
            (key, c)
        })
        .collect();
    Occurrences::from_map(m)
}

fn fold_occ(occ: Occurrences) -> Occurrences {
    let mut own: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut replicas: BTreeMap<NodeId, u64> = BTreeMap::new();
    for (n, c) in occ.into_map() {
        match n.as_str().split_once(OWN_MARK) {
            Some((base, _)) => *own.entry(NodeId::new(base)).or_insert(0) += c,
            None => {
                replicas.insert(n, c);
            }
        }
    }
    for (n, c) in replicas {
        own.entry(n).or_insert(c);
    }
    Occurrences::from_map(own)
}

fn map_st(st: &SignatureTrace, f: impl Fn(&Occurrences) -> Occurrences) -> SignatureTrace {
    let mut out = st.clone();
    out.occurrences = f(&st.occurrences);
    for e in &mut out.signature {
        e.occurrences = f(&e.occurrences);
    }
    out.canonicalize();
    out
}

/// Folds DSTs into domain knowledge. `min_sources` decides maturity.
pub fn build_dk(
    dsts: &[&Dst],
    min_sources: usize,
    threshold: usize,
    policy: MergePolicy,
) -> Result<DomainKnowledge, StoreError> {
    build_dk_metered(dsts, min_sources, threshold, policy, &mut WorkMeter::new())
}

pub fn build_dk_metered(
    dsts: &[&Dst],
    min_sources: usize,
    threshold: usize,
    policy: MergePolicy,
    meter: &mut WorkMeter,
) -> Result<DomainKnowledge, StoreError> {
    if dsts.is_empty() {
        return Err(StoreError::NoSources);
    }
    let mut pool: Vec<(String, SignatureTrace)> = dsts
        .iter()
        .enumerate()
        .flat_map(|(i, d)| {
            d.sts()
                .map(move |st| map_st(st, |o| mark_occ(o, d.node(), i)))
                .collect::<Vec<_>>()
        })
        .map(|st| (st_to_record(&st), st))
        .collect();
    pool.sort_by(|a, b| a.0.cmp(&b.0));
    let items: Vec<Candidate<EntryId>> = pool
        .into_iter()
        .map(|(_, st)| Candidate::new(None, st))
        .collect();
    let groups = cluster(items, Counting::Join, &policy, meter);

    let mut ranked: Vec<(Reverse<u64>, String, SignatureTrace)> = groups
        .into_iter()
        .map(|g| {
            let st = map_st(&g.st, |o| fold_occ(o.clone()));
            (Reverse(st.occurrences().total()), st_to_record(&st), st)
        })
        .collect();
    ranked.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    ranked.truncate(threshold.max(1));
    Ok(DomainKnowledge {
        entries: ranked.into_iter().map(|(_, _, st)| st).collect(),
        sources: dsts.len(),
        min_sources,
        threshold: threshold.max(1),
        policy,
    })
}

/// Pulls the more generalized DK version of every matching entry back into a
/// DST. Never adds entries. Per-origin counts take the maximum of the local
/// and DK values.
pub fn refresh_from_dk(dst: &mut Dst, dk: &DomainKnowledge) -> Result<bool, StoreError> {
    if !dk.is_mature() {
        return Err(StoreError::ImmatureDk {
            sources: dk.source_count(),
            required: dk.min_sources(),
        });
    }
    let policy = *dst.policy();
    let dk_items: Vec<Candidate<EntryId>> = dk
        .entries()
        .iter()
        .map(|st| Candidate::new(None, st.clone()))
        .collect();
    let mut meter = WorkMeter::new();
    let refreshed: Vec<Candidate<EntryId>> = dst
        .entries()
        .iter()
        .map(|e| {
            let mine = e.candidate(Some(e.id()));
            match dk_items.iter().find(|d| mine.equivalent(d, &policy)) {
                Some(d) => {
                    let st = combine(e.st(), &d.st, Counting::Join, policy.widen);
                    Candidate::new(Some(e.id()), st)
                }
                None => mine,
            }
        })
        .collect();
    let groups = cluster(refreshed, Counting::Join, &policy, &mut meter);
    Ok(dst.commit(groups))
}
