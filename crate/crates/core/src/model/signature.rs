//! Signature entities: what was observed, under which key, and how often.

use std::cmp::{Ordering, Reverse};
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ids::NodeId;
use super::value::GeneralizedValue;

/// The four kinds of runtime state a signature records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityCategory {
    FieldValue,
    ObjectState,
    OpenResource,
    Environment,
}

/// Names one observed entity, e.g. `field-value:server.pool.size`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityKey {
    path: Vec<String>,
    category: EntityCategory,
}

impl EntityKey {
    /// Panics on an empty path; use [`EntityKey::try_new`] for untrusted input.
    pub fn new<I, S>(category: EntityCategory, path: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::try_new(category, path).expect("entity key path must be non-empty")
    }

    pub fn try_new<I, S>(category: EntityCategory, path: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let path: Vec<String> = path.into_iter().map(Into::into).collect();
        if path.is_empty() {
            return None;
        }
        Some(Self { path, category })
    }

    /// Splits a dotted path: `EntityKey::dotted(FieldValue, "server.pool.size")`.
    pub fn dotted(category: EntityCategory, path: &str) -> Self {
        Self::new(category, path.split('.'))
    }

    pub fn path(&self) -> &[String] {
        &self.path
    }

    pub fn category(&self) -> EntityCategory {
        self.category
    }
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.join("."))
    }
}

/// Per-origin occurrence counter.
///
/// Counts are kept per node so that knowledge received twice (or echoed back
/// by a peer) is not counted twice: merging replicas takes the per-node
/// maximum, while recording a new local observation adds to the local count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Occurrences(BTreeMap<NodeId, u64>);

impl Occurrences {
    pub fn single(node: &NodeId) -> Self {
        Self::from_count(node, 1)
    }

    pub fn from_count(node: &NodeId, count: u64) -> Self {
        let mut m = BTreeMap::new();
        if count > 0 {
            m.insert(node.clone(), count);
        }
        Self(m)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn get(&self, node: &NodeId) -> u64 {
        self.0.get(node).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, u64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    /// New observations: counts add up.
    pub fn add(&mut self, other: &Occurrences) {
        for (node, c) in &other.0 {
            *self.0.entry(node.clone()).or_insert(0) += c;
        }
    }

    /// Replica reconciliation: per-node maximum.
    pub fn join(&mut self, other: &Occurrences) {
        for (node, c) in &other.0 {
            let slot = self.0.entry(node.clone()).or_insert(0);
            *slot = (*slot).max(*c);
        }
    }

    pub(crate) fn into_map(self) -> BTreeMap<NodeId, u64> {
        self.0
    }

    pub(crate) fn from_map(m: BTreeMap<NodeId, u64>) -> Self {
        Self(m.into_iter().filter(|(_, c)| *c > 0).collect())
    }
}

/// One ranked entity of a signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureEntity {
    pub key: EntityKey,
    pub value: GeneralizedValue,
    #[serde(rename = "occ")]
    pub occurrences: Occurrences,
}

impl SignatureEntity {
    /// Canonical order: occurrences descending, then key ascending.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        (Reverse(self.occurrences.total()), &self.key)
            .cmp(&(Reverse(other.occurrences.total()), &other.key))
    }
}
