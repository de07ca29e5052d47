//! How well a failing ST matches a fault model.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kinds::KindForest;
use super::model::FaultModel;
use crate::meter::WorkMeter;
use crate::model::{common_keys, distance, DistanceWeights, EntityKey, KindId, SignatureTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Error margin: a tagged ST within this distance counts as matched.
    pub eps: f64,
    /// Distance under which a tagged ST counts as the same scenario.
    pub eps_exact: f64,
    pub signature_weight: f64,
    pub trace_weight: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        let w = DistanceWeights::default();
        Self {
            eps: 0.25,
            eps_exact: 0.02,
            signature_weight: w.signature,
            trace_weight: w.trace,
        }
    }
}

impl MatchParams {
    pub fn weights(&self) -> DistanceWeights {
        DistanceWeights {
            signature: self.signature_weight,
            trace: self.trace_weight,
        }
    }

    pub fn distance(&self, a: &SignatureTrace, b: &SignatureTrace) -> f64 {
        distance(a, b, self.weights())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchCategory {
    Exact,
    Positive,
    Negative,
    Cannot,
    NoMatch,
}

impl MatchCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchCategory::Exact => "exact",
            MatchCategory::Positive => "positive",
            MatchCategory::Negative => "negative",
            MatchCategory::Cannot => "cannot",
            MatchCategory::NoMatch => "no-match",
        }
    }

    /// How much the category says about the relation, strongest first.
    pub(crate) fn strength(self) -> u8 {
        match self {
            MatchCategory::Exact => 4,
            MatchCategory::Positive => 3,
            MatchCategory::Negative => 2,
            MatchCategory::NoMatch => 1,
            MatchCategory::Cannot => 0,
        }
    }
}

impl fmt::Display for MatchCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "exact" => MatchCategory::Exact,
            "positive" => MatchCategory::Positive,
            "negative" => MatchCategory::Negative,
            "cannot" => MatchCategory::Cannot,
            "no-match" => MatchCategory::NoMatch,
            other => return Err(format!("unknown match category `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub category: MatchCategory,
    /// Strength of the match in `[0, 100]`; absent for cannot and no-match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    /// Why the result is what it is, for no-match and cannot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MatchResult {
    fn without_percent(category: MatchCategory, note: impl Into<String>) -> Self {
        Self {
            category,
            percent: None,
            positives: 0,
            negatives: 0,
            min_distance: None,
            note: Some(note.into()),
        }
    }
}

/// Matches `f` against every tagged ST of `model`.
///
/// A tagged ST counts positive when it lies within `eps` of `f`, negative
/// when it is at least `1 - eps` away, or when the kinds are related but the
/// two signatures share less than half their keys.
pub fn match_category(
    model: &FaultModel,
    f: &SignatureTrace,
    f_kind: Option<&KindId>,
    forest: &KindForest,
    params: &MatchParams,
) -> MatchResult {
    match_category_metered(model, f, f_kind, forest, params, &mut WorkMeter::new())
}

pub fn match_category_metered(
    model: &FaultModel,
    f: &SignatureTrace,
    f_kind: Option<&KindId>,
    forest: &KindForest,
    params: &MatchParams,
    meter: &mut WorkMeter,
) -> MatchResult {
    let tagged = model.tagged();
    if tagged.is_empty() {
        return MatchResult::without_percent(MatchCategory::NoMatch, "model has no tagged STs");
    }
    let kinds_related = f_kind.is_some_and(|k| forest.related(k, model.kind()));

    let mut positives = 0;
    let mut negatives = 0;
    let mut dmin = f64::INFINITY;
    let mut any_common = false;
    for s in tagged {
        meter.comparisons += 1;
        let d = params.distance(s, f);
        dmin = dmin.min(d);
        let common = common_keys(s, f);
        any_common |= common > 0;
        let union = s.signature().len() + f.signature().len() - common;
        if d <= params.eps {
            positives += 1;
        } else if d >= 1.0 - params.eps || (kinds_related && common * 2 < union) {
            negatives += 1;
        }
    }
    let n = tagged.len() as f64;
    let result = |category, percent: Option<f64>, note: Option<&str>| MatchResult {
        category,
        percent,
        positives,
        negatives,
        min_distance: Some(dmin),
        note: note.map(str::to_string),
    };

    if dmin <= params.eps_exact {
        return result(MatchCategory::Exact, Some(100.0 * (1.0 - dmin)), None);
    }
    let shares_structure = any_common || (f.signature().is_empty() && positives > 0);
    if !shares_structure && !kinds_related {
        return result(MatchCategory::Cannot, None, Some("no common structure"));
    }
    if positives == 0 {
        let required = required_keys(tagged);
        let have: BTreeSet<&EntityKey> = f.keys().collect();
        if !required.iter().all(|k| have.contains(k)) {
            return result(
                MatchCategory::NoMatch,
                None,
                Some("required attributes missing"),
            );
        }
    }
    if positives > negatives {
        result(
            MatchCategory::Positive,
            Some(100.0 * positives as f64 / n),
            None,
        )
    } else if negatives > positives {
        result(
            MatchCategory::Negative,
            Some(100.0 * negatives as f64 / n),
            None,
        )
    } else {
        result(MatchCategory::NoMatch, None, Some("no majority"))
    }
}

/// Keys every tagged ST carries.
fn required_keys(tagged: &[SignatureTrace]) -> BTreeSet<&EntityKey> {
    let mut it = tagged.iter();
    let first: BTreeSet<&EntityKey> = it.next().map(|s| s.keys().collect()).unwrap_or_default();
    it.fold(first, |acc, s| {
        let ks: BTreeSet<&EntityKey> = s.keys().collect();
        acc.intersection(&ks).copied().collect()
    })
}
