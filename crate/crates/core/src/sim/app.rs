//! The running application: executes requests, emits probe events, suffers
//! injected faults and reacts to recovery actions.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::faults::{fix_target, FaultSpec, FaultType, RootCauseTable, RESTORE_CONFIG};
use super::model::{AppModel, Resource};
use super::SimError;
use crate::model::{
    EntityCategory, EntityKey, FixId, MethodId, NodeId, Outcome, Probe, ProbeEvent, RunMeta,
    RunRecord, Scalar,
};

/// One step of a handler: an optional call at a depth and an optional probe.
type Step<'a> = (Option<(&'a MethodId, u32)>, Option<Probe>);

/// Where execution stopped when the fault hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPoint {
    pub method: MethodId,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveFault {
    pub fault: FaultType,
    pub trigger_seq: u64,
}

/// The run that failed last, kept so it can be replayed after a fix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedRun {
    pub run: u64,
    pub template: usize,
}

/// Mutable state of the application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppState {
    pub resources: BTreeMap<Resource, i64>,
    /// Requests served successfully so far.
    pub served: u64,
    pub config_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_fault: Option<ActiveFault>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_failure: Option<FailedRun>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution_point: Option<ExecutionPoint>,
}

/// A saved copy of the application state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    state: String,
}

impl Checkpoint {
    pub fn capture(state: &AppState) -> Self {
        Self {
            state: serde_json::to_string(state).expect("app state serializes"),
        }
    }

    pub fn state(&self) -> Result<AppState, SimError> {
        serde_json::from_str(&self.state).map_err(|e| SimError::Checkpoint(e.to_string()))
    }

    /// The serialized snapshot.
    pub fn as_str(&self) -> &str {
        &self.state
    }

    pub fn execution_point(&self) -> Option<ExecutionPoint> {
        self.state().ok().and_then(|s| s.execution_point)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryReport {
    pub fix: FixId,
    /// The fix is in the catalog.
    pub known: bool,
    /// The active fault was repaired.
    pub repaired: bool,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SimApp {
    model: AppModel,
    node: NodeId,
    seed: u64,
    table: RootCauseTable,
    state: AppState,
    weights: WeightedIndex<f64>,
}

fn mix(seed: u64, node: &NodeId, run: u64) -> u64 {
    // FNV-1a over the node id, folded with seed and run.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in node.as_str().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.rotate_left(17) ^ run.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

impl SimApp {
    pub fn new(model: AppModel, node: impl Into<NodeId>, seed: u64) -> Result<Self, SimError> {
        model.validate().map_err(SimError::InvalidModel)?;
        let weights = WeightedIndex::new(
            (0..model.workload.templates).map(|i| model.workload.popularity.powi(i as i32)),
        )
        .map_err(|e| SimError::InvalidModel(e.to_string()))?;
        let state = AppState {
            resources: model.resources.clone(),
            served: 0,
            config_version: 0,
            active_fault: None,
            last_failure: None,
            execution_point: None,
        };
        Ok(Self {
            model,
            node: node.into(),
            seed,
            table: RootCauseTable::default(),
            state,
            weights,
        })
    }

    pub fn model(&self) -> &AppModel {
        &self.model
    }

    pub fn node(&self) -> &NodeId {
        &self.node
    }

    pub fn state(&self) -> &AppState {
        &self.state
    }

    pub fn root_causes(&self) -> &RootCauseTable {
        &self.table
    }

    pub fn is_stable(&self) -> bool {
        self.state.active_fault.is_none()
    }

    pub fn active_fault(&self) -> Option<FaultType> {
        self.state.active_fault.as_ref().map(|a| a.fault)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.state)
    }

    pub fn restore(&mut self, cp: &Checkpoint) -> Result<(), SimError> {
        self.state = cp.state()?;
        Ok(())
    }

    fn rng(&self, run: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix(self.seed, &self.node, run))
    }

    /// Template drawn for `run`.
    pub fn template_for(&self, run: u64) -> usize {
        self.weights.sample(&mut self.rng(run))
    }

    /// Executes one run. An injected fault whose trigger names this run
    /// becomes active; an active fault makes the run fail.
    pub fn run(&mut self, run: u64, injected: Option<&FaultSpec>) -> RunRecord {
        if let Some(spec) = injected.filter(|s| s.trigger.run == run) {
            self.state.active_fault = Some(ActiveFault {
                fault: spec.fault,
                trigger_seq: spec.trigger.seq,
            });
        }
        let template = self.template_for(run);
        self.execute(run, template)
    }

    /// Replays the run that failed last. Returns whether it now completes.
    pub fn rerun_failed(&mut self) -> bool {
        match self.state.last_failure.clone() {
            Some(f) => !self.execute(f.run, f.template).outcome.is_fault(),
            None => self.is_stable(),
        }
    }

    fn execute(&mut self, run: u64, template: usize) -> RunRecord {
        let mut rng = self.rng(run);
        // Keep the template draw aligned with `template_for`.
        let _: usize = self.weights.sample(&mut rng);
        let mut events: Vec<ProbeEvent> = Vec::new();
        let mut stack: Vec<MethodId> = Vec::new();
        let fault = self.state.active_fault.clone();
        let failed: bool;

        let emit = |events: &mut Vec<ProbeEvent>, probe: Probe| -> bool {
            let seq = events.len() as u64;
            if let Some(f) = &fault {
                if seq >= f.trigger_seq {
                    return false;
                }
            }
            events.push(ProbeEvent { seq, probe });
            true
        };
        let call =
            |events: &mut Vec<ProbeEvent>, stack: &mut Vec<MethodId>, m: &MethodId, depth: u32| {
                let ok = emit(
                    events,
                    Probe::Call {
                        method: m.clone(),
                        depth,
                    },
                );
                if ok {
                    stack.truncate(depth as usize);
                    stack.push(m.clone());
                }
                ok
            };

        'run: {
            for (k, v) in &self.model.environment {
                let probe = Probe::Sample {
                    key: EntityKey::dotted(EntityCategory::Environment, k),
                    value: v.clone(),
                };
                if !emit(&mut events, probe) {
                    failed = true;
                    break 'run;
                }
            }
            for (i, h) in self.model.template(template).into_iter().enumerate() {
                let handler = &self.model.handlers[h];
                let latency: i64 = rng.gen_range(1..=3);
                let level = self.state.resources[&handler.resource];
                let steps: [Step; 4] = [
                    (
                        Some((&self.model.entry, 0)),
                        Some(Probe::Sample {
                            key: EntityKey::dotted(
                                EntityCategory::FieldValue,
                                "server.request.index",
                            ),
                            value: Scalar::Int(i as i64 + 1),
                        }),
                    ),
                    (
                        Some((&self.model.dispatch, 1)),
                        Some(Probe::Sample {
                            key: EntityKey::dotted(
                                EntityCategory::ObjectState,
                                "server.dispatch.route",
                            ),
                            value: Scalar::from(handler.method.as_str()),
                        }),
                    ),
                    (
                        Some((&handler.method, 2)),
                        Some(Probe::Sample {
                            key: handler.resource.key(),
                            value: Scalar::Int(level),
                        }),
                    ),
                    (
                        Some((&handler.leaf, 3)),
                        Some(Probe::Sample {
                            key: EntityKey::dotted(
                                EntityCategory::FieldValue,
                                &format!("{}.latency.ms", handler.method),
                            ),
                            value: Scalar::Int(latency),
                        }),
                    ),
                ];
                for (c, s) in steps {
                    if let Some((m, d)) = c {
                        if !call(&mut events, &mut stack, m, d) {
                            failed = true;
                            break 'run;
                        }
                    }
                    if let Some(p) = s {
                        if !emit(&mut events, p) {
                            failed = true;
                            break 'run;
                        }
                    }
                }
            }
            // A trigger past the end of the run fires once the work is done.
            failed = fault.is_some();
        }

        let meta = RunMeta {
            node: self.node.clone(),
            run,
        };
        if !failed {
            self.state.served += self.model.workload.requests_per_run as u64;
            self.state.last_failure = None;
            self.state.execution_point = None;
            return RunRecord {
                meta,
                events,
                outcome: Outcome::Stable,
                terminal_stack: None,
            };
        }

        let f = fault.expect("failure implies an active fault");
        let mut seq = events.len() as u64;
        if let Some(r) = f.fault.resource() {
            self.state.resources.insert(r, 0);
            events.push(ProbeEvent {
                seq,
                probe: Probe::Sample {
                    key: r.key(),
                    value: Scalar::Int(0),
                },
            });
            seq += 1;
        }
        events.push(ProbeEvent {
            seq,
            probe: Probe::Sample {
                key: EntityKey::dotted(EntityCategory::FieldValue, "error.code"),
                value: Scalar::from(f.fault.error_code()),
            },
        });
        self.state.last_failure = Some(FailedRun { run, template });
        self.state.execution_point = stack.last().map(|m| ExecutionPoint {
            method: m.clone(),
            seq,
        });
        RunRecord {
            meta,
            events,
            outcome: Outcome::Fault(f.fault.symptom()),
            terminal_stack: Some(stack),
        }
    }

    /// Runs a recovery action. Resets the resource it targets and repairs the
    /// active fault when the action addresses its root cause.
    pub fn apply_recovery(&mut self, fix: &FixId) -> RecoveryReport {
        let Some(target) = fix_target(fix) else {
            let msg = format!("unknown recovery action `{fix}`; nothing done");
            tracing::warn!(node = %self.node, "{msg}");
            return RecoveryReport {
                fix: fix.clone(),
                known: false,
                repaired: false,
                diagnostic: Some(msg),
            };
        };
        if let Some(r) = target {
            self.state.resources.insert(r, self.model.resources[&r]);
        }
        if fix.as_str() == RESTORE_CONFIG {
            self.state.config_version = 0;
        }
        let repaired = match &self.state.active_fault {
            Some(a) if self.table.heals(a.fault, fix) => {
                self.state.active_fault = None;
                true
            }
            _ => false,
        };
        RecoveryReport {
            fix: fix.clone(),
            known: true,
            repaired,
            diagnostic: None,
        }
    }

    /// Administrator intervention: every resource back to nominal, no fault.
    pub fn admin_reset(&mut self) {
        self.state.resources = self.model.resources.clone();
        self.state.active_fault = None;
        self.state.last_failure = None;
        self.state.execution_point = None;
    }
}
