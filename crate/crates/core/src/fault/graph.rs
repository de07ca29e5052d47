//! The fault-model graph: models as nodes, match categories as weighted
//! edges, refined by the kind family tree.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::kinds::KindForest;
use super::matching::{match_category, MatchCategory, MatchParams, MatchResult};
use super::model::FaultModel;
use super::FaultError;
use crate::model::{FaultId, KindId};

/// Factor applied to positive and negative weights between related kinds.
pub const FAMILY_FACTOR: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub fault: FaultId,
    pub kind: KindId,
    /// Root of the node's kind tree. Layout only.
    pub dimension: KindId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    /// Undirected similarity between two models.
    Similarity(MatchCategory),
    /// Directed from a model of an ancestor kind to one of a descendant kind.
    Refines,
}

impl EdgeKind {
    pub fn label(self) -> &'static str {
        match self {
            EdgeKind::Similarity(c) => c.as_str(),
            EdgeKind::Refines => "refines",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    /// For similarity edges `a < b`.
    pub a: FaultId,
    pub b: FaultId,
    pub kind: EdgeKind,
    /// Percent match in `[0, 100]`.
    pub weight: f64,
    /// The endpoints sit in different kind trees.
    pub inter_dimension: bool,
    /// Family refinement already scaled this edge.
    pub strengthened: bool,
}

impl GraphEdge {
    pub fn category(&self) -> Option<MatchCategory> {
        match self.kind {
            EdgeKind::Similarity(c) => Some(c),
            EdgeKind::Refines => None,
        }
    }

    pub fn touches(&self, f: &FaultId) -> bool {
        &self.a == f || &self.b == f
    }

    pub fn other(&self, f: &FaultId) -> Option<&FaultId> {
        if &self.a == f {
            Some(&self.b)
        } else if &self.b == f {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultModelGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    /// Sibling model pairs whose fixes may stand in for each other.
    shared_fix: Vec<(FaultId, FaultId)>,
}

impl FaultModelGraph {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn shared_fix_pairs(&self) -> &[(FaultId, FaultId)] {
        &self.shared_fix
    }

    /// Similarity edge between two models, if any.
    pub fn similarity(&self, x: &FaultId, y: &FaultId) -> Option<&GraphEdge> {
        self.edges
            .iter()
            .find(|e| matches!(e.kind, EdgeKind::Similarity(_)) && e.touches(x) && e.touches(y))
    }

    /// Models joined to `f` by a similarity edge of the given category.
    pub fn neighbors(&self, f: &FaultId, category: MatchCategory) -> Vec<&FaultId> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Similarity(category))
            .filter_map(|e| e.other(f))
            .collect()
    }

    pub fn shared_fix_partners(&self, f: &FaultId) -> Vec<&FaultId> {
        self.shared_fix
            .iter()
            .filter_map(|(a, b)| {
                if a == f {
                    Some(b)
                } else if b == f {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// True when the directed refinement edges contain no cycle.
    pub fn is_acyclic(&self) -> bool {
        let idx = |f: &FaultId| self.nodes.iter().position(|n| &n.fault == f);
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut adj = vec![Vec::new(); n];
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Refines) {
            let (Some(a), Some(b)) = (idx(&e.a), idx(&e.b)) else {
                return false;
            };
            adj[a].push(b);
            indeg[b] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for &j in &adj[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.push(j);
                }
            }
        }
        seen == n
    }

    /// Edge list as `node_a,node_b,category,weight` rows under a header.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::from("node_a,node_b,category,weight\n");
        for e in &self.edges {
            let _ = writeln!(out, "{},{},{},{:.2}", e.a, e.b, e.kind.label(), e.weight);
        }
        out
    }
}

fn stronger(x: MatchResult, y: MatchResult) -> MatchResult {
    let key = |r: &MatchResult| (r.category.strength(), r.percent.unwrap_or(0.0));
    if key(&y) > key(&x) {
        y
    } else {
        x
    }
}

/// Builds the graph from scratch: one similarity edge per model pair (the
/// stronger of the two directional matches), refinement edges along the kind
/// tree, then family refinement.
pub fn rebuild_graph<'a>(
    models: impl IntoIterator<Item = &'a FaultModel>,
    forest: &KindForest,
    params: &MatchParams,
) -> Result<FaultModelGraph, FaultError> {
    let mut models: Vec<&FaultModel> = models.into_iter().collect();
    models.sort_by(|a, b| a.fault().cmp(b.fault()));
    let mut graph = FaultModelGraph::default();
    for m in &models {
        if !forest.contains(m.kind()) {
            return Err(FaultError::UnknownKind(m.kind().clone()));
        }
        graph.nodes.push(GraphNode {
            fault: m.fault().clone(),
            kind: m.kind().clone(),
            dimension: forest.root(m.kind()).clone(),
        });
    }
    for (i, x) in models.iter().enumerate() {
        for y in &models[i + 1..] {
            let inter_dimension = forest.root(x.kind()) != forest.root(y.kind());
            if let (Some(rx), Some(ry)) = (x.representative(), y.representative()) {
                let xy = match_category(x, ry, Some(y.kind()), forest, params);
                let yx = match_category(y, rx, Some(x.kind()), forest, params);
                let best = stronger(xy, yx);
                let category = match best.category {
                    MatchCategory::Exact => MatchCategory::Positive,
                    c => c,
                };
                graph.edges.push(GraphEdge {
                    a: x.fault().clone(),
                    b: y.fault().clone(),
                    kind: EdgeKind::Similarity(category),
                    weight: best.percent.unwrap_or(0.0).clamp(0.0, 100.0),
                    inter_dimension,
                    strengthened: false,
                });
            }
            for (from, to) in [(x, y), (y, x)] {
                if forest.is_ancestor(from.kind(), to.kind()) {
                    graph.edges.push(GraphEdge {
                        a: from.fault().clone(),
                        b: to.fault().clone(),
                        kind: EdgeKind::Refines,
                        weight: 100.0,
                        inter_dimension: false,
                        strengthened: false,
                    });
                }
            }
        }
    }
    refine_family(&mut graph, forest)?;
    Ok(graph)
}

/// Uses the kind tree to drop cannot/no-match edges between related kinds,
/// strengthen their positive/negative edges, and mark sibling models as
/// candidates for sharing fixes. Applying it twice changes nothing.
pub fn refine_family(graph: &mut FaultModelGraph, forest: &KindForest) -> Result<(), FaultError> {
    let kind_of = |f: &FaultId| -> Result<KindId, FaultError> {
        let node = graph
            .nodes
            .iter()
            .find(|n| &n.fault == f)
            .ok_or_else(|| FaultError::UnknownModel(f.clone()))?;
        if !forest.contains(&node.kind) {
            return Err(FaultError::UnknownKind(node.kind.clone()));
        }
        Ok(node.kind.clone())
    };
    let mut kept = Vec::with_capacity(graph.edges.len());
    for mut e in std::mem::take(&mut graph.edges) {
        let (ka, kb) = (kind_of(&e.a)?, kind_of(&e.b)?);
        if let EdgeKind::Similarity(c) = e.kind {
            if forest.related(&ka, &kb) {
                match c {
                    MatchCategory::Cannot | MatchCategory::NoMatch => continue,
                    MatchCategory::Positive | MatchCategory::Negative if !e.strengthened => {
                        e.weight = (e.weight * FAMILY_FACTOR).min(100.0);
                        e.strengthened = true;
                    }
                    _ => {}
                }
            }
        }
        kept.push(e);
    }
    graph.edges = kept;

    let mut pairs = Vec::new();
    for (i, x) in graph.nodes.iter().enumerate() {
        for y in &graph.nodes[i + 1..] {
            if forest.siblings(&x.kind, &y.kind) {
                pairs.push((x.fault.clone(), y.fault.clone()));
            }
        }
    }
    graph.shared_fix = pairs;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::FaultKind;
    use crate::model::{EntityCategory, EntityKey, SignatureTrace};

    fn k(p: &str) -> EntityKey {
        EntityKey::dotted(EntityCategory::FieldValue, p)
    }

    fn st(keys: &[&str], calls: &[&str]) -> SignatureTrace {
        let mut b = SignatureTrace::builder("n", 0).calls(calls.iter().copied());
        for key in keys {
            b = b.entity(k(key), 0);
        }
        b.fault("x").build().unwrap()
    }

    fn forest() -> KindForest {
        KindForest::new([
            FaultKind::root("resource"),
            FaultKind::child("network", "resource"),
            FaultKind::child("memory", "resource"),
            FaultKind::root("logic"),
        ])
        .unwrap()
    }

    fn edge(a: &str, b: &str, c: MatchCategory, w: f64) -> GraphEdge {
        GraphEdge {
            a: a.into(),
            b: b.into(),
            kind: EdgeKind::Similarity(c),
            weight: w,
            inter_dimension: false,
            strengthened: false,
        }
    }

    fn node(f: &str, kind: &str, forest: &KindForest) -> GraphNode {
        GraphNode {
            fault: f.into(),
            kind: kind.into(),
            dimension: forest.root(&KindId::new(kind)).clone(),
        }
    }

    #[test]
    fn zero_and_one_model() {
        let f = forest();
        let g = rebuild_graph([], &f, &MatchParams::default()).unwrap();
        assert!(g.nodes().is_empty() && g.edges().is_empty());
        let m = FaultModel::new("a", "network").with_tagged(st(&["x"], &["m"]));
        let g = rebuild_graph([&m], &f, &MatchParams::default()).unwrap();
        assert_eq!(g.nodes().len(), 1);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn family_refinement() {
        let f = forest();
        let mut g = FaultModelGraph {
            nodes: vec![
                node("net", "network", &f),
                node("mem", "memory", &f),
                node("bug", "logic", &f),
                node("bug2", "logic", &f),
            ],
            edges: vec![
                edge("mem", "net", MatchCategory::Cannot, 0.0),
                edge("bug", "net", MatchCategory::Cannot, 0.0),
                edge("bug2", "mem", MatchCategory::Positive, 60.0),
                edge("bug", "bug2", MatchCategory::Positive, 60.0),
            ],
            shared_fix: Vec::new(),
        };
        refine_family(&mut g, &f).unwrap();
        let again = g.clone();
        refine_family(&mut g, &f).unwrap();
        assert_eq!(g, again);
        // Sibling cannot edge dropped; unrelated edges untouched.
        assert!(g.similarity(&"mem".into(), &"net".into()).is_none());
        assert_eq!(
            g.similarity(&"bug".into(), &"net".into()).unwrap().weight,
            0.0
        );
        assert_eq!(
            g.similarity(&"bug2".into(), &"mem".into()).unwrap().weight,
            60.0
        );
        assert_eq!(
            g.similarity(&"bug".into(), &"bug2".into()).unwrap().weight,
            75.0
        );
        assert_eq!(
            g.shared_fix_partners(&"net".into()),
            vec![&FaultId::new("mem")]
        );
        assert!(g.is_acyclic());
    }

    #[test]
    fn cross_kind_overlap_is_inter_dimension_edge() {
        let f = forest();
        let a = FaultModel::new("a", "network").with_tagged(st(&["p", "q", "r"], &["s", "t"]));
        let b = FaultModel::new("b", "logic").with_tagged(st(&["p", "q", "r"], &["s", "t", "u"]));
        let g = rebuild_graph([&a, &b], &f, &MatchParams::default()).unwrap();
        let e = g.similarity(&"a".into(), &"b".into()).unwrap();
        assert_eq!(e.category(), Some(MatchCategory::Positive));
        assert!(e.inter_dimension);
        assert!(g.to_edge_list().contains("a,b,positive,100.00"));
    }

    #[test]
    fn refinement_edges_follow_the_tree() {
        let f = forest();
        let a = FaultModel::new("generic", "resource").with_tagged(st(&["p"], &["s"]));
        let b = FaultModel::new("net", "network").with_tagged(st(&["p"], &["s", "t"]));
        let g = rebuild_graph([&b, &a], &f, &MatchParams::default()).unwrap();
        let r: Vec<_> = g
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Refines)
            .collect();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].a.as_str(), r[0].b.as_str()), ("generic", "net"));
        assert!(g.is_acyclic());
    }
}
