//! Generators, scenarios and checks shared by the integration tests and the
//! acceptance report.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

use selfheal::exchange::{Cluster, ClusterConfig, ShareMode, Topology};
use selfheal::fault::{classify, FaultKind, FaultModel, FaultModelDb, KindForest, MatchParams};
use selfheal::harness::administer;
use selfheal::heal::{on_failure, EscalationLog, HealingConfig, HealingOutcome};
use selfheal::model::{
    build_st, AttachedFix, EntityCategory, EntityKey, FixId, GeneralizedValue, SignatureTrace,
    WidenPolicy,
};
use selfheal::sim::{
    reference_kinds, AppModel, FaultSpec, FaultType, SimApp, WorkloadSpec, FIX_CATALOG,
};
use selfheal::store::Dst;

// Generators

const KEYS: [(&str, EntityCategory); 6] = [
    ("server.pool.size", EntityCategory::FieldValue),
    ("server.pool.busy", EntityCategory::ObjectState),
    ("net.link", EntityCategory::OpenResource),
    ("disk.used", EntityCategory::OpenResource),
    ("env.region", EntityCategory::Environment),
    ("cfg.version", EntityCategory::FieldValue),
];
const METHODS: [&str; 3] = ["accept", "dispatch", "db-call"];
const FAULTS: [&str; 2] = ["network-outage", "disk-full"];

pub fn key(i: usize) -> EntityKey {
    let (path, category) = KEYS[i];
    EntityKey::dotted(category, path)
}

pub fn value() -> impl Strategy<Value = GeneralizedValue> {
    prop_oneof![
        6 => (0i64..12).prop_map(GeneralizedValue::concrete),
        2 => (0i64..12, 0i64..6).prop_map(|(lo, w)| GeneralizedValue::range(lo, lo + w)),
        1 => prop::sample::subsequence(vec!["eu", "us", "ap"], 1..=2)
            .prop_map(GeneralizedValue::set),
        1 => Just(GeneralizedValue::any()),
    ]
}

/// A random ST over a small vocabulary, so that equivalent STs are common.
pub fn st() -> impl Strategy<Value = SignatureTrace> {
    (
        0usize..4,
        0u64..50,
        prop::collection::vec(0usize..METHODS.len(), 1..4),
        prop::collection::btree_map(0usize..KEYS.len(), value(), 0..5),
        prop::option::weighted(
            0.3,
            (
                0usize..FAULTS.len(),
                prop::collection::btree_map(0usize..FIX_CATALOG.len(), (0u64..4, 0u64..4), 0..3),
            ),
        ),
    )
        .prop_map(|(node, run, calls, entities, fault)| {
            let mut b = SignatureTrace::builder(format!("n{node}"), run)
                .calls(calls.iter().map(|&m| METHODS[m]));
            for (k, v) in entities {
                b = b.entity_value(key(k), v);
            }
            if let Some((f, fixes)) = fault {
                b = b.fault(FAULTS[f]);
                for (fix, (s, extra)) in fixes {
                    b = b.fix(FIX_CATALOG[fix], s, s + extra);
                }
            }
            b.build().expect("generated ST is valid")
        })
}

pub fn dst_from(node: &str, threshold: usize, sts: Vec<SignatureTrace>) -> Dst {
    let mut d = Dst::new(node, threshold);
    for s in sts {
        d.merge_st(s);
    }
    d
}

pub fn dst_with(threshold: usize) -> impl Strategy<Value = Dst> {
    prop::collection::vec(st(), 0..12).prop_map(move |sts| dst_from("n0", threshold, sts))
}

/// Two stores with the same threshold.
pub fn dst_pair() -> impl Strategy<Value = (Dst, Dst)> {
    (1usize..10).prop_flat_map(|t| {
        (
            prop::collection::vec(st(), 0..12).prop_map(move |s| dst_from("n0", t, s)),
            prop::collection::vec(st(), 0..12).prop_map(move |s| dst_from("n1", t, s)),
        )
    })
}

pub fn dst() -> impl Strategy<Value = Dst> {
    (1usize..10).prop_flat_map(dst_with)
}

/// A change applied to a store.
#[derive(Debug, Clone)]
pub enum Op {
    MergeSt(SignatureTrace),
    MergeDst(Vec<SignatureTrace>),
    /// Trial outcome of an attached fix on the entry at this rank.
    FixOutcome(usize, bool),
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => st().prop_map(Op::MergeSt),
        2 => prop::collection::vec(st(), 0..6).prop_map(Op::MergeDst),
        2 => (0usize..10, any::<bool>()).prop_map(|(i, ok)| Op::FixOutcome(i, ok)),
    ]
}

pub fn apply_op(d: &mut Dst, op: &Op) {
    match op {
        Op::MergeSt(s) => {
            d.merge_st(s.clone());
        }
        Op::MergeDst(sts) => {
            let remote = dst_from("remote", d.threshold(), sts.clone());
            d.merge_dst(&remote);
        }
        Op::FixOutcome(i, ok) => {
            let Some(e) = d.entries().get(i % d.len().max(1)) else {
                return;
            };
            let (id, fix) = (e.id(), e.st().fixes().first().map(|f| f.fix.clone()));
            if let Some(fix) = fix {
                d.record_fix_outcome(id, &fix, *ok).expect("attached fix");
            }
        }
    }
}

/// Threshold, a mutation sequence and the step after which a replica is cut.
pub fn op_script() -> impl Strategy<Value = (usize, Vec<Op>, usize)> {
    (1usize..10, prop::collection::vec(op(), 1..24)).prop_flat_map(|(t, ops)| {
        let n = ops.len();
        (Just(t), Just(ops), 0..=n)
    })
}

// Store properties

pub fn check_idempotence(d: &Dst) -> Result<(), TestCaseError> {
    let mut m = d.clone();
    m.merge_dst(d);
    prop_assert!(m.content_eq(d), "merge_dst(D, D) differs from D");
    Ok(())
}

pub fn check_commutativity((a, b): &(Dst, Dst)) -> Result<(), TestCaseError> {
    let mut ab = a.clone();
    ab.merge_dst(b);
    let mut ba = b.clone();
    ba.merge_dst(a);
    prop_assert!(ab.content_eq(&ba), "merge order changed the content");
    prop_assert!(ab.is_canonical() && ba.is_canonical());
    Ok(())
}

pub fn check_size_bound((t, ops, _): &(usize, Vec<Op>, usize)) -> Result<(), TestCaseError> {
    let mut d = Dst::new("n0", *t);
    for op in ops {
        apply_op(&mut d, op);
        prop_assert!(d.len() <= *t, "{} entries over threshold {t}", d.len());
        prop_assert!(d.is_canonical());
        let ranks: Vec<u64> = d.sts().map(|s| s.occurrences().total()).collect();
        prop_assert!(ranks.windows(2).all(|w| w[0] >= w[1]), "rank order broken");
    }
    Ok(())
}

/// Every entry that keeps its id covers what it covered before, counts at
/// least as many occurrences and keeps its keys.
pub fn check_generalization((a, b): &(Dst, Dst)) -> Result<(), TestCaseError> {
    let mut m = a.clone();
    m.merge_dst(b);
    for old in a.entries() {
        let Some(new) = m.get(old.id()) else { continue };
        prop_assert!(new.st().occurrences().total() >= old.st().occurrences().total());
        for e in old.st().signature() {
            let Some(n) = new.st().entity(&e.key) else {
                return Err(TestCaseError::fail(format!("key {} lost", e.key)));
            };
            prop_assert!(
                n.value.covers(&e.value),
                "{:?} no longer covered by {:?}",
                e.value,
                n.value
            );
        }
    }
    Ok(())
}

pub fn check_delta_replay((t, ops, cut): &(usize, Vec<Op>, usize)) -> Result<(), TestCaseError> {
    let mut d = Dst::new("n0", *t);
    let mut replica = d.snapshot();
    for (i, op) in ops.iter().enumerate() {
        if i == *cut {
            replica = d.snapshot();
        }
        apply_op(&mut d, op);
    }
    if *cut == ops.len() {
        replica = d.snapshot();
    }
    let delta = d
        .delta_since(replica.version())
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    replica
        .apply_delta(&delta)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(replica.version(), d.version());
    prop_assert!(replica.content_eq(&d), "replayed replica differs");
    let ids = |x: &Dst| x.entries().iter().map(|e| e.id()).collect::<Vec<_>>();
    prop_assert_eq!(ids(&replica), ids(&d));
    Ok(())
}

/// Runs `check` over `cases` inputs drawn with a fixed seed.
pub fn run_property<S, F>(cases: u32, strategy: S, check: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(&S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, |v| check(&v)).map_err(|e| match e {
        TestError::Fail(why, v) => format!("{why} for {v:?}"),
        TestError::Abort(why) => why.to_string(),
    })
}

// Exchange schedules

#[derive(Debug, Clone)]
pub enum Step {
    Record(usize, SignatureTrace),
    Tick,
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub nodes: usize,
    pub topology: Topology,
    pub share_interval: u64,
    pub threshold: usize,
    pub steps: Vec<Step>,
}

fn topology(nodes: usize) -> impl Strategy<Value = Topology> {
    let custom = prop::collection::vec(prop::collection::vec(0..nodes, 0..nodes), nodes).prop_map(
        move |lists| Topology::Custom {
            peers: lists
                .into_iter()
                .enumerate()
                .map(|(i, p)| p.into_iter().filter(|&j| j != i).collect())
                .collect(),
        },
    );
    prop_oneof![
        Just(Topology::FullyConnected),
        Just(Topology::Star),
        Just(Topology::Ring),
        Just(Topology::Line),
        custom,
    ]
}

pub fn schedule() -> impl Strategy<Value = Schedule> {
    (2usize..=8).prop_flat_map(|nodes| {
        let step = prop_oneof![
            3 => (0..nodes, st()).prop_map(|(n, s)| Step::Record(n, s)),
            2 => Just(Step::Tick),
        ];
        (
            topology(nodes),
            1u64..4,
            2usize..16,
            prop::collection::vec(step, 1..60),
        )
            .prop_map(
                move |(topology, share_interval, threshold, steps)| Schedule {
                    nodes,
                    topology,
                    share_interval,
                    threshold,
                    steps,
                },
            )
    })
}

/// Plays a schedule in one mode, then ticks until no message is in flight.
pub fn play(s: &Schedule, mode: ShareMode) -> Cluster {
    let mut c = Cluster::new(ClusterConfig {
        nodes: s.nodes,
        topology: s.topology.clone(),
        share_interval: s.share_interval,
        mode,
        dst_threshold: s.threshold,
        ..ClusterConfig::default()
    })
    .expect("valid schedule");
    for step in &s.steps {
        match step {
            Step::Record(n, st) => {
                c.record_st(*n, st.clone());
            }
            Step::Tick => {
                c.tick().expect("tick");
            }
        }
    }
    while c.pending() > 0 {
        c.tick().expect("tick");
    }
    c
}

pub fn check_exchange_equivalence(s: &Schedule) -> Result<(), TestCaseError> {
    let full = play(s, ShareMode::Full);
    let inc = play(s, ShareMode::Incremental);
    for i in 0..s.nodes {
        prop_assert!(
            full.dst(i).content_eq(inc.dst(i)),
            "node {i} differs between full and incremental"
        );
    }
    Ok(())
}

// Healing scenarios

/// Where the administrator's earlier lesson was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taught {
    StoreAndModels,
    StoreOnly,
    ModelsOnly,
}

#[derive(Debug)]
pub struct HealCase {
    pub fault: FaultType,
    pub seed: u64,
    pub outcome: HealingOutcome,
    pub root_causes: Vec<FixId>,
    pub log: EscalationLog,
    pub state_after: String,
}

impl HealCase {
    pub fn healed_correctly(&self) -> bool {
        self.outcome
            .healing_fix()
            .is_some_and(|f| self.root_causes.contains(f))
    }

    /// Healed exactly when some tried fix repairs the fault.
    pub fn oracle_sound(&self) -> bool {
        let tried_right = self
            .outcome
            .trials
            .iter()
            .any(|t| self.root_causes.contains(&t.fix));
        self.outcome.is_healed() == tried_right
    }
}

const TAUGHT_RUN: u64 = 10;

/// First run after `after` that replays the same request sequence.
pub fn recurrence_run(app: &SimApp, after: u64) -> u64 {
    let t = app.template_for(after);
    (after + 1..)
        .find(|&r| app.template_for(r) == t)
        .expect("templates recur")
}

/// A fault recurring in the request context where the administrator fixed
/// it before; custom faults come with every catalog fix attached.
pub fn heal_case(fault: FaultType, seed: u64, taught: Taught) -> HealCase {
    let policy = WidenPolicy::default();
    let mut app = SimApp::new(AppModel::server(WorkloadSpec::default()), "n0", seed).unwrap();
    let mut dst = Dst::new("n0", 256);
    let mut models = FaultModelDb::new(reference_kinds(), MatchParams::default());
    for run in 0..TAUGHT_RUN {
        let record = app.run(run, None);
        dst.merge_st(build_st(&record, policy).unwrap());
    }
    let seq = 6 + seed % 20;
    let record = app.run(TAUGHT_RUN, Some(&FaultSpec::new(fault, TAUGHT_RUN, seq)));
    let taught_st = build_st(&record, policy).unwrap();
    {
        let mut spare_dst = Dst::new("n0", 256);
        let mut spare_models = FaultModelDb::new(reference_kinds(), MatchParams::default());
        let (d, m) = match taught {
            Taught::StoreAndModels => (&mut dst, &mut models),
            Taught::StoreOnly => (&mut dst, &mut spare_models),
            Taught::ModelsOnly => (&mut spare_dst, &mut models),
        };
        administer(&mut app, &taught_st, fault, m, d).unwrap();
    }
    if !fault.is_transient() {
        let id = fault.as_str();
        models.add_model(FaultModel::new(id, fault.kind())).unwrap();
        models.tag(&id.into(), taught_st.clone()).unwrap();
        let mut with_fixes = taught_st.clone();
        for fix in FIX_CATALOG {
            models.ensure_fix(&id.into(), &fix.into()).unwrap();
            with_fixes
                .attach_fix_stats(AttachedFix::with_stats(fix, 1, 1))
                .unwrap();
        }
        dst.merge_st(with_fixes);
    }

    let again = recurrence_run(&app, TAUGHT_RUN);
    for run in TAUGHT_RUN + 1..again {
        let record = app.run(run, None);
        dst.merge_st(build_st(&record, policy).unwrap());
    }
    let record = app.run(again, Some(&FaultSpec::new(fault, again, seq)));
    let st_c = build_st(&record, policy).unwrap();
    let mut log = EscalationLog::in_memory();
    let outcome = on_failure(
        &mut app,
        &st_c,
        &mut dst,
        &mut models,
        &HealingConfig::default(),
        &mut log,
    )
    .unwrap();
    HealCase {
        fault,
        seed,
        outcome,
        root_causes: app.root_causes().healing_fixes(fault).cloned().collect(),
        log,
        state_after: app.checkpoint().as_str().to_string(),
    }
}

// Classifier examples

fn fk(i: usize) -> EntityKey {
    EntityKey::dotted(EntityCategory::FieldValue, &format!("k{i}"))
}

/// A faulting ST with the given keys (all valued 0) and calls.
pub fn fault_st(keys: impl IntoIterator<Item = usize>, calls: &[&str]) -> SignatureTrace {
    let mut b = SignatureTrace::builder("n0", 0).calls(calls.iter().copied());
    for i in keys {
        b = b.entity(fk(i), 0);
    }
    b.fault("observed").build().unwrap()
}

/// The failure under classification: keys k0..k9, one call.
pub fn probe() -> SignatureTrace {
    fault_st(0..10, &["m"])
}

/// Within the margin of [`probe`] (distance 1/6) but not merge-equivalent to
/// it or to each other.
fn near(tag: usize) -> SignatureTrace {
    let extra = 100 + 2 * tag;
    fault_st((0..8).chain([extra, extra + 1]), &["m"])
}

/// Distance 1 from [`probe`].
fn far(tag: usize) -> SignatureTrace {
    let base = 200 + 3 * tag;
    fault_st(base..base + 3, &["z"])
}

/// Distance 1/3 from [`probe`]: neither positive nor negative.
fn middling(tag: usize) -> SignatureTrace {
    let extra = 300 + 5 * tag;
    fault_st((0..5).chain(extra..extra + 5), &["m"])
}

fn model(id: &str, sts: Vec<SignatureTrace>, fix: &str) -> FaultModel {
    sts.into_iter()
        .fold(FaultModel::new(id, "app"), |m, s| m.with_tagged(s))
        .with_fix(fix, 1, 2)
}

fn classify_db(models: Vec<FaultModel>) -> FaultModelDb {
    let forest = KindForest::new([FaultKind::root("app")]).unwrap();
    let mut db = FaultModelDb::new(forest, MatchParams::default());
    for m in models {
        db.add_model(m).unwrap();
    }
    db
}

fn decided_fix(db: &FaultModelDb, f: &SignatureTrace) -> Option<String> {
    classify(f, db, db.params())
        .decision
        .fix()
        .map(|f| f.as_str().to_string())
}

/// Two positive candidates: 4 of 5 and 3 of 5 tagged STs within the margin.
pub fn positive_db() -> FaultModelDb {
    classify_db(vec![
        model(
            "p60",
            vec![near(0), near(1), near(2), far(0), far(1)],
            "fix-60",
        ),
        model(
            "p80",
            vec![near(3), near(4), near(5), near(6), far(2)],
            "fix-80",
        ),
    ])
}

/// Two negative candidates: 7 of 10 tagged STs far away and none near, and
/// 2 of 5 far away with one near.
pub fn negative_db() -> FaultModelDb {
    classify_db(vec![
        model(
            "n70",
            (0..7).map(far).chain((0..3).map(middling)).collect(),
            "fix-70",
        ),
        model(
            "n40",
            vec![far(10), far(11), near(10), middling(10), middling(11)],
            "fix-40",
        ),
    ])
}

/// The four classifier examples: name, expected decision, actual decision.
pub fn classify_examples() -> Vec<(&'static str, Option<String>, Option<String>)> {
    let f = probe();
    let mut out = Vec::new();

    let exact = classify_db(vec![
        model("decoy", vec![middling(0)], "decoy-fix"),
        model("same", vec![f.clone()], "same-fix"),
    ]);
    out.push((
        "exact hit",
        Some("same-fix".into()),
        decided_fix(&exact, &f),
    ));

    let empty = classify_db(Vec::new());
    out.push(("empty db", None, decided_fix(&empty, &f)));

    let positive = positive_db();
    out.push((
        "positive 80 vs 60",
        Some("fix-80".into()),
        decided_fix(&positive, &f),
    ));

    let negative = negative_db();
    out.push((
        "negative 70 vs 40",
        Some("fix-40".into()),
        decided_fix(&negative, &f),
    ));
    out
}
