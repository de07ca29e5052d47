//! Picking the fault model, and from it the fix, for a failing ST.

use std::collections::BTreeSet;

use serde::Serialize;

use super::db::FaultModelDb;
use super::matching::{match_category_metered, MatchCategory, MatchParams, MatchResult};
use super::model::find_fix;
use crate::meter::WorkMeter;
use crate::model::{best_first, AttachedFix, FaultId, FixId, KindId, SignatureTrace};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "kebab-case")]
pub enum Decision {
    Fix {
        fix: FixId,
        /// Model the fault was classified as.
        model: FaultId,
        /// Sibling model the fix was borrowed from, when the winner had none.
        #[serde(skip_serializing_if = "Option::is_none")]
        borrowed_from: Option<FaultId>,
    },
    Escalate {
        reason: String,
    },
}

impl Decision {
    pub fn fix(&self) -> Option<&FixId> {
        match self {
            Decision::Fix { fix, .. } => Some(fix),
            Decision::Escalate { .. } => None,
        }
    }

    pub fn is_escalate(&self) -> bool {
        matches!(self, Decision::Escalate { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub decision: Decision,
    /// Every model's result, by fault id.
    pub results: Vec<(FaultId, MatchResult)>,
    /// Candidates left after discarding, best first. The first is the winner.
    pub ranked: Vec<FaultId>,
    /// Distance evaluations performed.
    pub comparisons: u64,
}

impl Classification {
    pub fn result(&self, fault: &FaultId) -> Option<&MatchResult> {
        self.results
            .iter()
            .find(|(f, _)| f == fault)
            .map(|(_, r)| r)
    }

    pub fn winner(&self) -> Option<&FaultId> {
        self.ranked.first()
    }
}

/// Classifies a failing ST whose fault kind is not known.
pub fn classify(f: &SignatureTrace, db: &FaultModelDb, params: &MatchParams) -> Classification {
    classify_as(f, None, db, params)
}

/// Classifies `f` against every model.
///
/// An exact match wins outright. Otherwise positive candidates rank first
/// (highest percent first), then negative ones (lowest percent first), ties
/// to the lower fault id. Walking that order, each surviving positive model
/// discards the models it is negatively linked to in the graph, and each
/// surviving negative model those it is positively linked to. The first
/// candidate wins; with none left the fault is escalated.
pub fn classify_as(
    f: &SignatureTrace,
    f_kind: Option<&KindId>,
    db: &FaultModelDb,
    params: &MatchParams,
) -> Classification {
    let mut meter = WorkMeter::new();
    let results: Vec<(FaultId, MatchResult)> = db
        .models()
        .map(|m| {
            let r = match_category_metered(m, f, f_kind, db.forest(), params, &mut meter);
            (m.fault().clone(), r)
        })
        .collect();
    let escalate = |reason: &str, results, ranked| Classification {
        decision: Decision::Escalate {
            reason: reason.to_string(),
        },
        results,
        ranked,
        comparisons: meter.comparisons,
    };
    if results.is_empty() {
        return escalate("no fault models", results, Vec::new());
    }

    let exact = results
        .iter()
        .filter(|(_, r)| r.category == MatchCategory::Exact)
        .min_by(|(fa, a), (fb, b)| {
            a.min_distance
                .partial_cmp(&b.min_distance)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| fa.cmp(fb))
        })
        .map(|(id, _)| id.clone());
    let ranked = match exact {
        Some(id) => vec![id],
        None => rank(&results, db),
    };
    let Some(winner) = ranked.first().cloned() else {
        return escalate("no positive or negative match", results, ranked);
    };
    match fix_for(db, &winner) {
        Some((fix, borrowed_from)) => Classification {
            decision: Decision::Fix {
                fix,
                model: winner,
                borrowed_from,
            },
            results,
            ranked,
            comparisons: meter.comparisons,
        },
        None => escalate("matched model has no fixes", results, ranked),
    }
}

fn rank(results: &[(FaultId, MatchResult)], db: &FaultModelDb) -> Vec<FaultId> {
    let pct = |r: &MatchResult| r.percent.unwrap_or(0.0);
    let mut positives: Vec<&(FaultId, MatchResult)> = results
        .iter()
        .filter(|(_, r)| r.category == MatchCategory::Positive)
        .collect();
    positives.sort_by(|(fa, a), (fb, b)| pct(b).total_cmp(&pct(a)).then_with(|| fa.cmp(fb)));
    let mut negatives: Vec<&(FaultId, MatchResult)> = results
        .iter()
        .filter(|(_, r)| r.category == MatchCategory::Negative)
        .collect();
    negatives.sort_by(|(fa, a), (fb, b)| pct(a).total_cmp(&pct(b)).then_with(|| fa.cmp(fb)));

    let graph = db.graph();
    let mut discarded: BTreeSet<&FaultId> = BTreeSet::new();
    let mut kept = Vec::new();
    for (id, r) in positives.into_iter().chain(negatives) {
        if discarded.contains(id) {
            continue;
        }
        let opposite = match r.category {
            MatchCategory::Positive => MatchCategory::Negative,
            _ => MatchCategory::Positive,
        };
        discarded.extend(graph.neighbors(id, opposite));
        kept.push(id.clone());
    }
    kept
}

/// The model's own best fix, or the best fix among its fix-sharing siblings.
fn fix_for(db: &FaultModelDb, model: &FaultId) -> Option<(FixId, Option<FaultId>)> {
    let m = db.model(model)?;
    if let Ok(f) = find_fix(m) {
        return Some((f.fix.clone(), None));
    }
    let mut borrowed: Vec<(&AttachedFix, &FaultId)> = db
        .graph()
        .shared_fix_partners(model)
        .into_iter()
        .filter_map(|p| db.model(p).and_then(|pm| find_fix(pm).ok()).map(|f| (f, p)))
        .collect();
    borrowed.sort_by(|(a, pa), (b, pb)| best_first(a, b).then_with(|| pa.cmp(pb)));
    borrowed
        .first()
        .map(|(f, p)| (f.fix.clone(), Some((*p).clone())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::{FaultKind, FaultModel, KindForest};
    use crate::model::{EntityCategory, EntityKey};

    fn k(i: usize) -> EntityKey {
        EntityKey::dotted(EntityCategory::FieldValue, &format!("k{i}"))
    }

    fn st(keys: std::ops::Range<usize>, calls: &[&str]) -> SignatureTrace {
        let mut b = SignatureTrace::builder("n", 0).calls(calls.iter().copied());
        for i in keys {
            b = b.entity(k(i), 0);
        }
        b.fault("x").build().unwrap()
    }

    fn db(models: Vec<FaultModel>) -> FaultModelDb {
        let forest = KindForest::new([FaultKind::root("a"), FaultKind::root("b")]).unwrap();
        let mut db = FaultModelDb::new(forest, MatchParams::default());
        for m in models {
            db.add_model(m).unwrap();
        }
        db
    }

    #[test]
    fn empty_db_escalates() {
        let c = classify(&st(0..3, &["m"]), &db(vec![]), &MatchParams::default());
        assert!(c.decision.is_escalate());
    }

    #[test]
    fn exact_hit_returns_that_models_fix() {
        let f = st(0..4, &["m", "n"]);
        let d = db(vec![
            FaultModel::new("other", "b")
                .with_tagged(st(0..4, &["m"]))
                .with_fix("wrong", 9, 9),
            FaultModel::new("mine", "a")
                .with_tagged(f.clone())
                .with_fix("right", 0, 0),
        ]);
        let c = classify(&f, &d, &MatchParams::default());
        assert_eq!(c.decision.fix().map(FixId::as_str), Some("right"));
    }

    #[test]
    fn unrelated_everything_escalates() {
        let d = db(vec![FaultModel::new("m", "a")
            .with_tagged(st(0..3, &["x"]))
            .with_fix("fix", 1, 1)]);
        let c = classify(&st(10..12, &["y"]), &d, &MatchParams::default());
        assert!(c.decision.is_escalate());
    }
}
