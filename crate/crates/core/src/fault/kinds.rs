//! The family tree of fault kinds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FaultError;
use crate::model::KindId;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaultKind {
    pub id: KindId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<KindId>,
}

impl FaultKind {
    pub fn root(id: impl Into<KindId>) -> Self {
        Self {
            id: id.into(),
            parent: None,
        }
    }

    pub fn child(id: impl Into<KindId>, parent: impl Into<KindId>) -> Self {
        Self {
            id: id.into(),
            parent: Some(parent.into()),
        }
    }
}

/// Kinds with parent links. Always a forest: every parent is known and no
/// chain loops back on itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KindForest {
    parents: BTreeMap<KindId, Option<KindId>>,
}

impl KindForest {
    pub fn new(kinds: impl IntoIterator<Item = FaultKind>) -> Result<Self, FaultError> {
        let mut parents = BTreeMap::new();
        for k in kinds {
            if parents.insert(k.id.clone(), k.parent).is_some() {
                return Err(FaultError::DuplicateKind(k.id));
            }
        }
        let forest = Self { parents };
        forest.validate()?;
        Ok(forest)
    }

    fn validate(&self) -> Result<(), FaultError> {
        for (id, parent) in &self.parents {
            if let Some(p) = parent {
                if !self.parents.contains_key(p) {
                    return Err(FaultError::UnknownParent {
                        kind: id.clone(),
                        parent: p.clone(),
                    });
                }
            }
            let mut cur = parent.as_ref();
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if p == id || steps > self.parents.len() {
                    return Err(FaultError::KindCycle(id.clone()));
                }
                cur = self.parents.get(p).and_then(Option::as_ref);
            }
        }
        Ok(())
    }

    pub fn contains(&self, id: &KindId) -> bool {
        self.parents.contains_key(id)
    }

    pub fn kinds(&self) -> impl Iterator<Item = FaultKind> + '_ {
        self.parents.iter().map(|(id, p)| FaultKind {
            id: id.clone(),
            parent: p.clone(),
        })
    }

    pub fn parent(&self, id: &KindId) -> Option<&KindId> {
        self.parents.get(id).and_then(Option::as_ref)
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, id: &KindId) -> Vec<&KindId> {
        let mut out = Vec::new();
        let mut cur = self.parent(id);
        while let Some(p) = cur {
            out.push(p);
            cur = self.parent(p);
        }
        out
    }

    /// Top of the tree `id` belongs to.
    pub fn root<'a>(&'a self, id: &'a KindId) -> &'a KindId {
        self.ancestors(id).last().copied().unwrap_or(id)
    }

    pub fn is_ancestor(&self, ancestor: &KindId, of: &KindId) -> bool {
        self.ancestors(of).contains(&ancestor)
    }

    /// Both kinds sit in the same tree.
    pub fn related(&self, a: &KindId, b: &KindId) -> bool {
        self.contains(a) && self.contains(b) && self.root(a) == self.root(b)
    }

    /// Same kind, or children of the same parent.
    pub fn siblings(&self, a: &KindId, b: &KindId) -> bool {
        a == b || matches!((self.parent(a), self.parent(b)), (Some(x), Some(y)) if x == y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forest() -> KindForest {
        KindForest::new([
            FaultKind::root("resource"),
            FaultKind::child("network", "resource"),
            FaultKind::child("storage", "resource"),
            FaultKind::child("disk", "storage"),
            FaultKind::root("logic"),
        ])
        .unwrap()
    }

    #[test]
    fn relations() {
        let f = forest();
        let k = |s: &str| KindId::new(s);
        assert_eq!(f.root(&k("disk")), &k("resource"));
        assert!(f.related(&k("disk"), &k("network")));
        assert!(!f.related(&k("disk"), &k("logic")));
        assert!(f.siblings(&k("network"), &k("storage")));
        assert!(!f.siblings(&k("network"), &k("disk")));
        assert!(f.is_ancestor(&k("resource"), &k("disk")));
        assert!(!f.is_ancestor(&k("disk"), &k("resource")));
    }

    #[test]
    fn cycles_and_dangling_parents_rejected() {
        let cyc = KindForest::new([FaultKind::child("a", "b"), FaultKind::child("b", "a")]);
        assert!(matches!(cyc, Err(FaultError::KindCycle(_))));
        let own = KindForest::new([FaultKind::child("a", "a")]);
        assert!(matches!(own, Err(FaultError::KindCycle(_))));
        let dangling = KindForest::new([FaultKind::child("a", "zzz")]);
        assert!(matches!(dangling, Err(FaultError::UnknownParent { .. })));
    }
}
