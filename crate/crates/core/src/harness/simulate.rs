//! The full pipeline: runs, STs, per-node stores, exchange, domain
//! knowledge, injected faults and healing, then everything persisted.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{io_err, HarnessError, SimConfig};
use crate::exchange::{node_name, Cluster, ExchangeStats};
use crate::fault::{save_db, FaultModel, FaultModelDb};
use crate::heal::{on_failure, ClusterKnowledge, EscalationLog, HealingOutcome};
use crate::model::{build_st, AttachedFix, FaultId, FixId, SignatureTrace, WidenPolicy};
use crate::sim::{reference_kinds, AppModel, FaultSpec, FaultType, SimApp};
use crate::store::{build_dk, save_dk, save_dst, DomainKnowledge, Dst};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeSummary {
    pub node: String,
    pub runs: u64,
    pub stable: u64,
    pub faults: u64,
    pub healed: u64,
    pub escalated: u64,
    pub dst_records: usize,
}

/// What happened to one injected fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HealEvent {
    pub node: String,
    pub run: u64,
    pub fault: FaultType,
    /// The fix that healed it; `None` when escalated.
    pub fix: Option<FixId>,
    pub trials: usize,
    pub elapsed: u64,
    pub comparisons: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub runs: u64,
    pub nodes: Vec<NodeSummary>,
    pub events: Vec<HealEvent>,
    pub dk_records: usize,
    pub dk_sources: usize,
    pub dk_mature: bool,
    pub models: usize,
    pub graph_edges: usize,
    pub exchange: ExchangeStats,
    pub clock: u64,
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "runs {}", self.runs);
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "node {} runs={} stable={} faults={} healed={} escalated={} dst-records={}",
                n.node, n.runs, n.stable, n.faults, n.healed, n.escalated, n.dst_records
            );
        }
        for e in &self.events {
            let _ = writeln!(
                out,
                "fault {} run={} type={} result={} fix={} trials={} ticks={} comparisons={}",
                e.node,
                e.run,
                e.fault,
                if e.fix.is_some() {
                    "healed"
                } else {
                    "escalated"
                },
                e.fix.as_ref().map_or("-", |f| f.as_str()),
                e.trials,
                e.elapsed,
                e.comparisons
            );
        }
        let _ = writeln!(
            out,
            "dk records={} sources={} mature={}",
            self.dk_records, self.dk_sources, self.dk_mature
        );
        let _ = writeln!(out, "models {}", self.models);
        let _ = writeln!(out, "graph-edges {}", self.graph_edges);
        let x = &self.exchange;
        let _ = writeln!(
            out,
            "exchange messages={} snapshots={} deltas={} records-sent={} dropped={} stale={}",
            x.messages, x.snapshots, x.deltas, x.records_sent, x.dropped, x.stale
        );
        let _ = writeln!(out, "clock {}", self.clock);
        out
    }

    pub fn healed(&self) -> usize {
        self.events.iter().filter(|e| e.fix.is_some()).count()
    }

    pub fn escalated(&self) -> usize {
        self.events.len() - self.healed()
    }
}

/// Administrator after an escalation: resets the application and, for a
/// transient fault, records the failure with the fix that repairs it, both as
/// a fault model and in the node's store. Bugs in the application itself are
/// left to its developers and teach nothing.
pub fn administer(
    app: &mut SimApp,
    st: &SignatureTrace,
    fault: FaultType,
    models: &mut FaultModelDb,
    dst: &mut Dst,
) -> Result<(), HarnessError> {
    app.admin_reset();
    let fixes: Vec<FixId> = app.root_causes().healing_fixes(fault).cloned().collect();
    if fixes.is_empty() {
        return Ok(());
    }
    let id = FaultId::new(fault.as_str());
    if models.model(&id).is_none() {
        models.add_model(FaultModel::new(id.clone(), fault.kind()))?;
    }
    models.tag(&id, st.clone())?;
    let mut learned = st.clone();
    for f in fixes {
        models.ensure_fix(&id, &f)?;
        models.record_fix_outcome(&id, &f, true)?;
        learned.attach_fix_stats(AttachedFix::with_stats(f, 1, 1))?;
    }
    dst.merge_st(learned);
    Ok(())
}

fn current_dk(cluster: &Cluster, config: &SimConfig) -> Result<DomainKnowledge, HarnessError> {
    let dsts: Vec<&Dst> = (0..cluster.len()).map(|i| cluster.dst(i)).collect();
    Ok(build_dk(
        &dsts,
        config.knowledge.min_sources,
        config.knowledge.dk_threshold,
        cluster.config().merge_policy(),
    )?)
}

/// Runs the whole pipeline and writes its stores, logs and summary to `out`.
pub fn simulate(config: &SimConfig, out: &Path) -> Result<Summary, HarnessError> {
    config.validate()?;
    let n = config.cluster.nodes;
    let esc_dir = out.join("escalations");
    fs::create_dir_all(&esc_dir).map_err(io_err(&esc_dir))?;

    let mut cluster = Cluster::new(config.cluster.clone())?;
    let model = AppModel::server(config.workload.clone());
    let mut apps = (0..n)
        .map(|i| SimApp::new(model.clone(), node_name(i), config.cluster.seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut logs = Vec::with_capacity(n);
    for i in 0..n {
        let path = esc_dir.join(format!("node-{}.log", node_name(i)));
        fs::write(&path, "").map_err(io_err(&path))?;
        logs.push(EscalationLog::to_file(path));
    }
    let mut models = FaultModelDb::new(reference_kinds(), config.matching);
    let policy = WidenPolicy {
        set_cap: config.cluster.set_cap,
    };
    let mut faults: BTreeMap<(usize, u64), FaultSpec> = BTreeMap::new();
    for f in &config.faults {
        if faults.insert((f.node, f.run), f.spec()).is_some() {
            return Err(HarnessError::Config(format!(
                "two faults on node {} in run {}",
                f.node, f.run
            )));
        }
    }

    let mut nodes: Vec<NodeSummary> = (0..n)
        .map(|i| NodeSummary {
            node: node_name(i).to_string(),
            ..NodeSummary::default()
        })
        .collect();
    let mut events = Vec::new();

    for run in 0..config.runs {
        for i in 0..n {
            let record = apps[i].run(run, faults.get(&(i, run)));
            let st = build_st(&record, policy)?;
            nodes[i].runs += 1;
            let Some(fault) = apps[i].active_fault() else {
                nodes[i].stable += 1;
                cluster.record_st(i, st);
                continue;
            };
            nodes[i].faults += 1;
            let dk = current_dk(&cluster, config)?;
            let outcome: HealingOutcome = {
                let mut knowledge = ClusterKnowledge {
                    cluster: &mut cluster,
                    node: i,
                    dk: Some(&dk),
                };
                on_failure(
                    &mut apps[i],
                    &st,
                    &mut knowledge,
                    &mut models,
                    &config.healing,
                    &mut logs[i],
                )?
            };
            let fix = outcome.healing_fix().cloned();
            if fix.is_some() {
                nodes[i].healed += 1;
            } else {
                nodes[i].escalated += 1;
                administer(&mut apps[i], &st, fault, &mut models, cluster.dst_mut(i))?;
            }
            events.push(HealEvent {
                node: node_name(i).to_string(),
                run,
                fault,
                fix,
                trials: outcome.trials.len(),
                elapsed: outcome.elapsed,
                comparisons: outcome.comparisons,
            });
        }
        cluster.tick()?;
    }

    let dk = current_dk(&cluster, config)?;
    for (i, node) in nodes.iter_mut().enumerate() {
        node.dst_records = cluster.dst(i).len();
        save_dst(
            out.join(format!("node-{}.dst", node_name(i))),
            cluster.dst(i),
        )?;
    }
    save_dk(out.join("dk.store"), &dk)?;
    save_db(out.join("models.db"), &models)?;
    let edges_path = out.join("graph.edges");
    fs::write(&edges_path, models.graph().to_edge_list()).map_err(io_err(&edges_path))?;

    let summary = Summary {
        runs: config.runs,
        nodes,
        events,
        dk_records: dk.len(),
        dk_sources: dk.source_count(),
        dk_mature: dk.is_mature(),
        models: models.len(),
        graph_edges: models.graph().edges().len(),
        exchange: cluster.stats(),
        clock: cluster.clock().now(),
    };
    let summary_path = out.join("summary.txt");
    fs::write(&summary_path, summary.to_text()).map_err(io_err(&summary_path))?;
    Ok(summary)
}
