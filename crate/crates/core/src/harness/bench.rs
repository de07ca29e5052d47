//! Cost and size measurements as run counts grow.
//!
//! Every cost is a deterministic work counter, so tables are identical on
//! any machine. Each repeat uses its own seed; one pass per repeat executes
//! the largest run count and reads the metrics whenever a configured run
//! count is reached, which equals separate passes since runs are
//! deterministic.
//!
//! Metrics per run count:
//! - `st-gather-ticks`: probe events consumed plus values widened, per ST;
//! - `dst-merge-ticks`: ST comparisons per store merge since the previous
//!   run count;
//! - `dst-merge-ticks-total`: all merge comparisons so far, per node;
//! - `dst-size-records`: mean store size;
//! - `match-ticks`, `match-ticks-repeat`: comparisons the healer spends on a
//!   fault the store knows, at its next occurrence and at the one after.

use std::fmt::Write as _;

use super::{HarnessError, SimConfig};
use crate::exchange::{node_name, Cluster, ClusterConfig};
use crate::fault::FaultModelDb;
use crate::heal::{on_failure, EscalationLog};
use crate::meter::WorkMeter;
use crate::model::{build_st, build_st_metered, AttachedFix, WidenPolicy};
use crate::sim::{reference_kinds, AppModel, FaultSpec, SimApp};

pub const METRIC_HEADER: &str = "experiment,repeat,runs,dst_records,metric,value";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub experiment: &'static str,
    /// `None` for the average over repeats.
    pub repeat: Option<usize>,
    /// Runs per node so far.
    pub runs: u64,
    /// Mean store size over the nodes at that point.
    pub dst_records: f64,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
}

impl MetricTable {
    pub fn to_text(&self) -> String {
        let mut out = String::from(METRIC_HEADER);
        out.push('\n');
        for r in &self.rows {
            let repeat = r.repeat.map_or("avg".to_string(), |i| i.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{:.2},{},{:.2}",
                r.experiment, repeat, r.runs, r.dst_records, r.metric, r.value
            );
        }
        out
    }

    /// Averaged values of `metric`, in run-count order.
    pub fn averages(&self, metric: &str) -> Vec<(u64, f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.repeat.is_none() && r.metric == metric)
            .map(|r| (r.runs, r.dst_records, r.value))
            .collect()
    }
}

const METRICS: usize = 6;

/// Measured at one run count in one repeat.
struct Point {
    dst_records: f64,
    values: [(&'static str, &'static str, f64); METRICS],
}

/// Runs the benchmark described by `config.bench`.
pub fn bench(config: &SimConfig) -> Result<MetricTable, HarnessError> {
    config.validate()?;
    let spec = &config.bench;
    let mut counts = spec.run_counts.clone();
    counts.sort_unstable();
    counts.dedup();

    let mut per_repeat: Vec<Vec<Point>> = Vec::new();
    for repeat in 0..spec.repeats {
        per_repeat.push(one_repeat(config, &counts, repeat as u64)?);
    }

    let mut table = MetricTable::default();
    for (pi, &runs) in counts.iter().enumerate() {
        for k in 0..METRICS {
            let mut sum = 0.0;
            let mut size = 0.0;
            for (repeat, points) in per_repeat.iter().enumerate() {
                let p = &points[pi];
                let (experiment, metric, value) = p.values[k];
                table.rows.push(MetricRow {
                    experiment,
                    repeat: Some(repeat),
                    runs,
                    dst_records: p.dst_records,
                    metric,
                    value,
                });
                sum += value;
                size += p.dst_records;
            }
            let n = per_repeat.len() as f64;
            let (experiment, metric, _) = per_repeat[0][pi].values[k];
            table.rows.push(MetricRow {
                experiment,
                repeat: None,
                runs,
                dst_records: size / n,
                metric,
                value: sum / n,
            });
        }
    }
    Ok(table)
}

fn one_repeat(config: &SimConfig, counts: &[u64], repeat: u64) -> Result<Vec<Point>, HarnessError> {
    let spec = &config.bench;
    let seed = config.cluster.seed.wrapping_add(repeat);
    let mut cluster = Cluster::new(ClusterConfig {
        nodes: spec.nodes,
        seed,
        ..config.cluster.clone()
    })?;
    let model = AppModel::server(config.workload.clone());
    let mut apps = (0..spec.nodes)
        .map(|i| SimApp::new(model.clone(), node_name(i), seed))
        .collect::<Result<Vec<_>, _>>()?;
    let policy = WidenPolicy {
        set_cap: config.cluster.set_cap,
    };
    let mut gather = WorkMeter::new();
    let mut since = WorkMeter::new();
    let mut points = Vec::new();
    let last = *counts.last().expect("validated non-empty");
    for run in 0..last {
        for (i, app) in apps.iter_mut().enumerate() {
            let record = app.run(run, None);
            let st = build_st_metered(&record, policy, &mut gather)?;
            cluster.record_st(i, st);
        }
        cluster.tick()?;
        let done = run + 1;
        if !counts.contains(&done) {
            continue;
        }
        let sts = (done * spec.nodes as u64) as f64;
        let nodes = spec.nodes as f64;
        let size = (0..spec.nodes).map(|i| cluster.dst(i).len()).sum::<usize>() as f64 / nodes;
        let (first, again) = known_fault_matching(config, &cluster, &apps[0], done, policy)?;
        let merged = cluster.meter();
        let per_merge = (merged.comparisons - since.comparisons) as f64
            / (merged.merges - since.merges).max(1) as f64;
        since = merged;
        points.push(Point {
            dst_records: size,
            values: [
                (
                    "gather-merge",
                    "st-gather-ticks",
                    (gather.probe_events + gather.widenings) as f64 / sts,
                ),
                ("gather-merge", "dst-merge-ticks", per_merge),
                (
                    "gather-merge",
                    "dst-merge-ticks-total",
                    merged.comparisons as f64 / nodes,
                ),
                ("size", "dst-size-records", size),
                ("match", "match-ticks", first as f64),
                ("match", "match-ticks-repeat", again as f64),
            ],
        });
    }
    Ok(points)
}

/// Comparisons the healer spends on a fault the first node's store already
/// knows, at its next occurrence and at the one after.
fn known_fault_matching(
    config: &SimConfig,
    cluster: &Cluster,
    app: &SimApp,
    runs: u64,
    policy: WidenPolicy,
) -> Result<(u64, u64), HarnessError> {
    let spec = &config.bench;
    let mut dst = cluster.dst(0).snapshot();
    let mut app = app.clone();
    let mut models = FaultModelDb::new(reference_kinds(), config.matching);
    let mut log = EscalationLog::in_memory();

    // An earlier occurrence the administrator fixed by hand.
    let record = app.run(
        runs,
        Some(&FaultSpec::new(spec.probe_fault, runs, spec.probe_seq)),
    );
    let mut taught = build_st(&record, policy)?;
    for fix in app.root_causes().healing_fixes(spec.probe_fault) {
        taught.attach_fix_stats(AttachedFix::with_stats(fix.clone(), 1, 1))?;
    }
    app.admin_reset();
    dst.merge_st(taught);

    let mut cost = [0u64; 2];
    for (k, c) in cost.iter_mut().enumerate() {
        let run = runs + 1 + k as u64;
        let record = app.run(
            run,
            Some(&FaultSpec::new(spec.probe_fault, run, spec.probe_seq)),
        );
        let st = build_st(&record, policy)?;
        let outcome = on_failure(
            &mut app,
            &st,
            &mut dst,
            &mut models,
            &config.healing,
            &mut log,
        )?;
        if !outcome.is_healed() {
            app.admin_reset();
        }
        *c = outcome.comparisons;
    }
    Ok((cost[0], cost[1]))
}
