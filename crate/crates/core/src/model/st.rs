//! Signature-traces and their construction from raw probe records.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ids::{FaultId, FixId, MethodId, NodeId};
use super::signature::{EntityKey, Occurrences, SignatureEntity};
use super::trace::{Trace, TraceEvent};
use super::value::{widen, GeneralizedValue, Scalar, WidenPolicy};
use super::ModelError;
use crate::meter::WorkMeter;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Stable,
    Fault(FaultId),
}

impl Outcome {
    pub fn is_fault(&self) -> bool {
        matches!(self, Outcome::Fault(_))
    }

    pub fn fault_id(&self) -> Option<&FaultId> {
        match self {
            Outcome::Fault(id) => Some(id),
            Outcome::Stable => None,
        }
    }
}

/// Success statistics of one fix attached to a carrier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttachedFix {
    pub fix: FixId,
    pub successes: u64,
    pub attempts: u64,
}

impl AttachedFix {
    pub fn new(fix: impl Into<FixId>) -> Self {
        Self {
            fix: fix.into(),
            successes: 0,
            attempts: 0,
        }
    }

    pub fn with_stats(fix: impl Into<FixId>, successes: u64, attempts: u64) -> Self {
        Self {
            fix: fix.into(),
            successes,
            attempts,
        }
    }

    /// Laplace-smoothed success rate `(s + 1) / (a + 2)`.
    pub fn smoothed_rate(&self) -> f64 {
        (self.successes as f64 + 1.0) / (self.attempts as f64 + 2.0)
    }

    /// Compares smoothed rates exactly, without going through floats.
    pub fn rate_cmp(&self, other: &AttachedFix) -> Ordering {
        let lhs = (self.successes as u128 + 1) * (other.attempts as u128 + 2);
        let rhs = (other.successes as u128 + 1) * (self.attempts as u128 + 2);
        lhs.cmp(&rhs)
    }

    pub fn record(&mut self, succeeded: bool) {
        self.attempts += 1;
        if succeeded {
            self.successes += 1;
        }
    }
}

/// Orders fixes best-first: smoothed rate descending, then fix id ascending.
pub fn best_first(a: &AttachedFix, b: &AttachedFix) -> Ordering {
    b.rate_cmp(a).then_with(|| a.fix.cmp(&b.fix))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunMeta {
    pub node: NodeId,
    pub run: u64,
}

/// One run's generalized signature and trace, its outcome and the fixes
/// known to apply to it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureTrace {
    pub(crate) meta: RunMeta,
    pub(crate) outcome: Outcome,
    #[serde(rename = "occ")]
    pub(crate) occurrences: Occurrences,
    #[serde(rename = "sig")]
    pub(crate) signature: Vec<SignatureEntity>,
    pub(crate) trace: Trace,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub(crate) fixes: Vec<AttachedFix>,
}

impl SignatureTrace {
    pub fn builder(node: impl Into<NodeId>, run: u64) -> StBuilder {
        StBuilder::new(node.into(), run)
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn outcome(&self) -> &Outcome {
        &self.outcome
    }

    pub fn occurrences(&self) -> &Occurrences {
        &self.occurrences
    }

    pub fn signature(&self) -> &[SignatureEntity] {
        &self.signature
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn fixes(&self) -> &[AttachedFix] {
        &self.fixes
    }

    pub fn entity(&self, key: &EntityKey) -> Option<&SignatureEntity> {
        self.signature.iter().find(|e| &e.key == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &EntityKey> {
        self.signature.iter().map(|e| &e.key)
    }

    pub fn fix(&self, id: &FixId) -> Option<&AttachedFix> {
        self.fixes.iter().find(|f| &f.fix == id)
    }

    /// Best attached fix by smoothed rate, ties to the lowest id.
    pub fn best_fix(&self) -> Option<&AttachedFix> {
        self.fixes.iter().min_by(|a, b| best_first(a, b))
    }

    /// Attaches a fix with zero statistics if not already attached.
    pub fn attach_fix(&mut self, fix: impl Into<FixId>) -> Result<(), ModelError> {
        self.attach_fix_stats(AttachedFix::new(fix))
    }

    pub fn attach_fix_stats(&mut self, fix: AttachedFix) -> Result<(), ModelError> {
        if !self.outcome.is_fault() {
            return Err(ModelError::StableWithFixes);
        }
        if fix.successes > fix.attempts {
            return Err(ModelError::InvalidFixStats(fix.fix));
        }
        match self.fixes.iter_mut().find(|f| f.fix == fix.fix) {
            Some(existing) => *existing = fix,
            None => self.fixes.push(fix),
        }
        self.fixes.sort_by(|a, b| a.fix.cmp(&b.fix));
        Ok(())
    }

    /// Counts one trial of an attached fix.
    pub fn record_fix_outcome(&mut self, fix: &FixId, succeeded: bool) -> Result<(), ModelError> {
        let slot = self
            .fixes
            .iter_mut()
            .find(|f| &f.fix == fix)
            .ok_or_else(|| ModelError::UnattachedFix(fix.clone()))?;
        slot.record(succeeded);
        Ok(())
    }

    /// Replaces the outcome, e.g. when tagging an ST with a fault model.
    pub fn relabel(&mut self, outcome: Outcome) {
        if !outcome.is_fault() {
            self.fixes.clear();
        }
        self.outcome = outcome;
    }

    pub fn is_canonical(&self) -> bool {
        self.signature
            .windows(2)
            .all(|w| w[0].canonical_cmp(&w[1]) == Ordering::Less)
    }

    pub(crate) fn canonicalize(&mut self) {
        self.signature.sort_by(SignatureEntity::canonical_cmp);
        self.fixes.sort_by(|a, b| a.fix.cmp(&b.fix));
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.trace.terminal_stack.is_some() != self.outcome.is_fault() {
            return Err(ModelError::StackMismatch);
        }
        if !self.outcome.is_fault() && !self.fixes.is_empty() {
            return Err(ModelError::StableWithFixes);
        }
        if let Some(f) = self.fixes.iter().find(|f| f.successes > f.attempts) {
            return Err(ModelError::InvalidFixStats(f.fix.clone()));
        }
        let mut paths = std::collections::BTreeSet::new();
        for e in &self.signature {
            if !paths.insert(e.key.path()) {
                return Err(ModelError::DuplicateKey(e.key.to_string()));
            }
        }
        if !self.is_canonical() {
            return Err(ModelError::NotCanonical);
        }
        Ok(())
    }
}

/// Convenience builder, mostly for tests and hand-authored fault models.
#[derive(Debug, Clone)]
pub struct StBuilder {
    meta: RunMeta,
    outcome: Outcome,
    count: u64,
    entities: BTreeMap<EntityKey, (GeneralizedValue, u64)>,
    events: Vec<TraceEvent>,
    stack: Option<Vec<MethodId>>,
    fixes: Vec<AttachedFix>,
    policy: WidenPolicy,
}

impl StBuilder {
    fn new(node: NodeId, run: u64) -> Self {
        Self {
            meta: RunMeta { node, run },
            outcome: Outcome::Stable,
            count: 1,
            entities: BTreeMap::new(),
            events: Vec::new(),
            stack: None,
            fixes: Vec::new(),
            policy: WidenPolicy::default(),
        }
    }

    pub fn occurrences(mut self, count: u64) -> Self {
        self.count = count.max(1);
        self
    }

    pub fn entity(self, key: EntityKey, value: impl Into<Scalar>) -> Self {
        self.entity_value(key, GeneralizedValue::concrete(value))
    }

    pub fn entity_value(self, key: EntityKey, value: GeneralizedValue) -> Self {
        self.entity_ranked(key, value, 1)
    }

    pub fn entity_ranked(
        mut self,
        key: EntityKey,
        value: GeneralizedValue,
        occurrences: u64,
    ) -> Self {
        let policy = self.policy;
        self.entities
            .entry(key)
            .and_modify(|(v, _)| *v = widen(v, &value, policy))
            .or_insert((value, occurrences.max(1)));
        self
    }

    /// Appends a call at `depth`; sequence numbers are assigned in order.
    pub fn call(mut self, method: impl Into<MethodId>, depth: u32) -> Self {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            method: method.into(),
            depth,
            seq,
        });
        self
    }

    /// Appends a flat sequence of calls at depth 0.
    pub fn calls<I, S>(mut self, methods: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<MethodId>,
    {
        for m in methods {
            self = self.call(m, 0);
        }
        self
    }

    /// Marks the run as faulted; the terminal stack defaults to the last call.
    pub fn fault(mut self, id: impl Into<FaultId>) -> Self {
        self.outcome = Outcome::Fault(id.into());
        self
    }

    pub fn stack<I, S>(mut self, methods: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<MethodId>,
    {
        self.stack = Some(methods.into_iter().map(Into::into).collect());
        self
    }

    pub fn fix(mut self, fix: impl Into<FixId>, successes: u64, attempts: u64) -> Self {
        self.fixes
            .push(AttachedFix::with_stats(fix, successes, attempts));
        self
    }

    pub fn build(self) -> Result<SignatureTrace, ModelError> {
        let node = self.meta.node.clone();
        let stack = match (&self.outcome, self.stack) {
            (Outcome::Fault(_), Some(s)) => Some(s),
            (Outcome::Fault(_), None) => Some(
                self.events
                    .last()
                    .map(|e| vec![e.method.clone()])
                    .unwrap_or_default(),
            ),
            (Outcome::Stable, s) => s,
        };
        let mut st = SignatureTrace {
            meta: self.meta,
            outcome: self.outcome,
            occurrences: Occurrences::from_count(&node, self.count),
            signature: self
                .entities
                .into_iter()
                .map(|(key, (value, occ))| SignatureEntity {
                    key,
                    value,
                    occurrences: Occurrences::from_count(&node, occ),
                })
                .collect(),
            trace: Trace {
                events: self.events,
                terminal_stack: stack,
            },
            fixes: self.fixes,
        };
        st.canonicalize();
        st.validate()?;
        Ok(st)
    }
}

/// A probe fired by the instrumented application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "kebab-case")]
pub enum Probe {
    /// A method invocation at the given stack depth.
    Call { method: MethodId, depth: u32 },
    /// A sampled piece of runtime state.
    Sample { key: EntityKey, value: Scalar },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub probe: Probe,
}

/// Everything the collector saw during one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub events: Vec<ProbeEvent>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_stack: Option<Vec<MethodId>>,
}

/// Builds the signature-trace of a single run.
///
/// Repeated samples of the same key within the run are widened together;
/// every key ends up exactly once with an occurrence count of one.
pub fn build_st(record: &RunRecord, policy: WidenPolicy) -> Result<SignatureTrace, ModelError> {
    build_st_metered(record, policy, &mut WorkMeter::new())
}

/// [`build_st`], counting probe events consumed and values widened.
pub fn build_st_metered(
    record: &RunRecord,
    policy: WidenPolicy,
    meter: &mut WorkMeter,
) -> Result<SignatureTrace, ModelError> {
    meter.probe_events += record.events.len() as u64;
    let mut prev_seq: Option<u64> = None;
    let mut prev_depth: Option<u32> = None;
    let mut values: BTreeMap<EntityKey, GeneralizedValue> = BTreeMap::new();
    let mut categories: BTreeMap<&[String], _> = BTreeMap::new();
    let mut events = Vec::new();

    for (index, ev) in record.events.iter().enumerate() {
        if let Some(prev) = prev_seq {
            if ev.seq <= prev {
                return Err(ModelError::NonMonotoneSeq {
                    index,
                    prev,
                    seq: ev.seq,
                });
            }
        }
        prev_seq = Some(ev.seq);
        match &ev.probe {
            Probe::Call { method, depth } => {
                let limit = prev_depth.map_or(0, |d| d + 1);
                if *depth > limit {
                    return Err(ModelError::DepthJump {
                        seq: ev.seq,
                        depth: *depth,
                        limit,
                    });
                }
                prev_depth = Some(*depth);
                events.push(TraceEvent {
                    method: method.clone(),
                    depth: *depth,
                    seq: ev.seq,
                });
            }
            Probe::Sample { key, value } => {
                if let Some(cat) = categories.insert(key.path(), key.category()) {
                    if cat != key.category() {
                        return Err(ModelError::CategoryConflict(key.to_string()));
                    }
                }
                let observed = GeneralizedValue::concrete(value.clone());
                values
                    .entry(key.clone())
                    .and_modify(|v| {
                        meter.widenings += 1;
                        *v = widen(v, &observed, policy)
                    })
                    .or_insert(observed);
            }
        }
    }

    if record.terminal_stack.is_some() != record.outcome.is_fault() {
        return Err(ModelError::StackMismatch);
    }

    let node = &record.meta.node;
    let mut st = SignatureTrace {
        meta: record.meta.clone(),
        outcome: record.outcome.clone(),
        occurrences: Occurrences::single(node),
        signature: values
            .into_iter()
            .map(|(key, value)| SignatureEntity {
                key,
                value,
                occurrences: Occurrences::single(node),
            })
            .collect(),
        trace: Trace {
            events,
            terminal_stack: record.terminal_stack.clone(),
        },
        fixes: Vec::new(),
    };
    st.canonicalize();
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityCategory, Shape};

    fn meta() -> RunMeta {
        RunMeta {
            node: NodeId::new("n0"),
            run: 0,
        }
    }

    fn key(p: &str) -> EntityKey {
        EntityKey::dotted(EntityCategory::FieldValue, p)
    }

    #[test]
    fn empty_stable_record() {
        let rec = RunRecord {
            meta: meta(),
            events: vec![],
            outcome: Outcome::Stable,
            terminal_stack: None,
        };
        let st = build_st(&rec, WidenPolicy::default()).unwrap();
        assert!(st.signature().is_empty());
        assert!(st.trace().events.is_empty());
        assert_eq!(st.outcome(), &Outcome::Stable);
    }

    #[test]
    fn repeated_key_is_widened_once() {
        let rec = RunRecord {
            meta: meta(),
            events: vec![
                ProbeEvent {
                    seq: 0,
                    probe: Probe::Sample {
                        key: key("pool.size"),
                        value: 5.into(),
                    },
                },
                ProbeEvent {
                    seq: 1,
                    probe: Probe::Sample {
                        key: key("pool.size"),
                        value: 7.into(),
                    },
                },
            ],
            outcome: Outcome::Stable,
            terminal_stack: None,
        };
        let st = build_st(&rec, WidenPolicy::default()).unwrap();
        assert_eq!(st.signature().len(), 1);
        let e = &st.signature()[0];
        assert_eq!(e.occurrences.total(), 1);
        assert_eq!(
            e.value.shape(),
            &Shape::Set {
                values: vec![Scalar::Int(5), Scalar::Int(7)]
            }
        );
    }

    #[test]
    fn non_monotone_seq_rejected() {
        let rec = RunRecord {
            meta: meta(),
            events: vec![
                ProbeEvent {
                    seq: 3,
                    probe: Probe::Call {
                        method: "a".into(),
                        depth: 0,
                    },
                },
                ProbeEvent {
                    seq: 3,
                    probe: Probe::Call {
                        method: "b".into(),
                        depth: 1,
                    },
                },
            ],
            outcome: Outcome::Stable,
            terminal_stack: None,
        };
        assert!(matches!(
            build_st(&rec, WidenPolicy::default()),
            Err(ModelError::NonMonotoneSeq { index: 1, .. })
        ));
    }

    #[test]
    fn depth_jump_rejected() {
        let rec = RunRecord {
            meta: meta(),
            events: vec![ProbeEvent {
                seq: 0,
                probe: Probe::Call {
                    method: "a".into(),
                    depth: 2,
                },
            }],
            outcome: Outcome::Stable,
            terminal_stack: None,
        };
        assert!(matches!(
            build_st(&rec, WidenPolicy::default()),
            Err(ModelError::DepthJump { .. })
        ));
    }

    #[test]
    fn fault_requires_stack() {
        let rec = RunRecord {
            meta: meta(),
            events: vec![],
            outcome: Outcome::Fault("io-error".into()),
            terminal_stack: None,
        };
        assert!(matches!(
            build_st(&rec, WidenPolicy::default()),
            Err(ModelError::StackMismatch)
        ));
    }

    #[test]
    fn smoothed_rate_ordering() {
        let a = AttachedFix::with_stats("a", 0, 0);
        let b = AttachedFix::with_stats("b", 1, 3);
        // 1/2 vs 2/5
        assert_eq!(best_first(&a, &b), Ordering::Less);
        let c = AttachedFix::with_stats("c", 1, 2);
        // tie at 1/2 goes to the lower id
        assert_eq!(best_first(&a, &c), Ordering::Less);
    }

    #[test]
    fn fix_counters_reject_unattached() {
        let mut st = SignatureTrace::builder("n0", 0)
            .call("a", 0)
            .fault("f")
            .fix("x", 0, 0)
            .build()
            .unwrap();
        st.record_fix_outcome(&"x".into(), true).unwrap();
        assert_eq!(st.fix(&"x".into()).unwrap().successes, 1);
        assert!(st.record_fix_outcome(&"y".into(), true).is_err());
    }
}
