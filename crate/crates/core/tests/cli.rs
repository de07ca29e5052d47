//! The command-line tool end to end: exit codes, persisted files and the
//! summary it prints.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use selfheal::fault::{classify, load_db, save_db, FaultModelDb, MatchParams};
use selfheal::harness::{administer, decision_line, HealEvent};
use selfheal::heal::EscalationLog;
use selfheal::model::{build_st, st_from_record, st_to_record, WidenPolicy};
use selfheal::sim::{reference_kinds, AppModel, FaultSpec, FaultType, SimApp, WorkloadSpec};
use selfheal::store::{load_dk, load_dst, Dst};

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn selfheal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfheal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn minimal_config_persists_a_one_entry_store() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfheal(&[
        "simulate",
        "--config",
        path(&repo_file("configs/minimal.toml")),
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dst = load_dst(dir.path().join("node-n0.dst")).unwrap();
    assert_eq!(dst.len(), 1);
    assert!(stdout(&o).contains("node n0 runs=1 stable=1"));
}

#[test]
fn unknown_key_exits_2_naming_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "runs = 3\n\n[cluster]\nnodez = 2\n").unwrap();
    let o = selfheal(&[
        "simulate",
        "--config",
        path(&config),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("nodez"), "{err}");
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn invalid_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[cluster]\nnodes = 0\n").unwrap();
    let o = selfheal(&["bench", "--config", path(&config)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn corrupt_stores_exit_3_with_the_record_number() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = selfheal(&[
        "simulate",
        "--config",
        path(&repo_file("configs/reference.toml")),
        "--out",
        path(&sim),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let dst = fs::read_to_string(sim.join("node-n0.dst")).unwrap();
    let mut lines: Vec<&str> = dst.lines().collect();
    lines[3] = "{\"v\":1,\"body\":{\"id\":";
    let broken = dir.path().join("broken.dst");
    fs::write(&broken, lines.join("\n")).unwrap();
    let o = selfheal(&["inspect", path(&broken)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("record 4"), "{}", stderr(&o));

    let models = fs::read_to_string(sim.join("models.db")).unwrap();
    let broken = dir.path().join("broken.db");
    fs::write(&broken, models.replacen("\"fault\"", "\"faul\"", 1)).unwrap();
    let fault = dir.path().join("fault.st");
    fs::write(&fault, "").unwrap();
    let o = selfheal(&[
        "classify",
        "--models",
        path(&broken),
        "--fault",
        path(&fault),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

fn events_of(summary: &str) -> Vec<(String, String)> {
    summary
        .lines()
        .filter(|l| l.starts_with("fault "))
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            (
                f[1].to_string(),
                f[4].trim_start_matches("result=").to_string(),
            )
        })
        .collect()
}

fn field(line: &str, name: &str) -> usize {
    line.split(' ')
        .find_map(|w| w.strip_prefix(&format!("{name}=")))
        .unwrap_or_else(|| panic!("{name} in {line}"))
        .parse()
        .unwrap()
}

#[test]
fn summary_matches_a_recount_of_the_persisted_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfheal(&[
        "simulate",
        "--config",
        path(&repo_file("configs/reference.toml")),
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary, stdout(&o));
    let events = events_of(&summary);

    for line in summary.lines().filter(|l| l.starts_with("node ")) {
        let node = line.split(' ').nth(1).unwrap();
        let dst = load_dst(dir.path().join(format!("node-{node}.dst"))).unwrap();
        assert_eq!(field(line, "dst-records"), dst.len(), "{node}");
        let log =
            EscalationLog::read(dir.path().join(format!("escalations/node-{node}.log"))).unwrap();
        assert_eq!(field(line, "escalated"), log.len(), "{node}");
        let mine: Vec<_> = events.iter().filter(|(n, _)| n == node).collect();
        assert_eq!(field(line, "faults"), mine.len());
        let healed = mine.iter().filter(|(_, r)| r == "healed").count();
        assert_eq!(field(line, "healed"), healed);
        assert_eq!(
            field(line, "runs"),
            field(line, "stable") + field(line, "faults")
        );
    }

    let dk = load_dk(dir.path().join("dk.store")).unwrap();
    let dk_line = summary.lines().find(|l| l.starts_with("dk ")).unwrap();
    assert_eq!(field(dk_line, "records"), dk.len());
    assert_eq!(field(dk_line, "sources"), dk.source_count());
    let db = load_db(dir.path().join("models.db")).unwrap();
    assert!(summary.contains(&format!("models {}\n", db.len())));
    let edges = fs::read_to_string(dir.path().join("graph.edges")).unwrap();
    assert!(summary.contains(&format!("graph-edges {}\n", edges.lines().count() - 1)));
}

#[test]
fn reference_run_heals_recurrences_and_escalates_bugs() {
    let dir = tempfile::tempdir().unwrap();
    let config = selfheal::harness::SimConfig::load(repo_file("configs/reference.toml")).unwrap();
    let summary = selfheal::harness::simulate(&config, dir.path()).unwrap();
    let by_run = |node: &str, run: u64| -> &HealEvent {
        summary
            .events
            .iter()
            .find(|e| e.node.as_str() == node && e.run == run)
            .unwrap()
    };
    // Same node, same context as the fixed occurrence.
    for (node, run) in [("n0", 6), ("n1", 12), ("n2", 11)] {
        assert!(by_run(node, run).fix.is_some(), "{node} run {run}");
    }
    // Learned on another node.
    for (node, run) in [("n4", 19), ("n3", 17)] {
        assert!(by_run(node, run).fix.is_some(), "{node} run {run}");
    }
    for e in &summary.events {
        if e.fault == FaultType::CustomNontransient {
            assert!(e.fix.is_none());
        }
    }
}

fn write_record(dir: &Path, name: &str, record: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("{record}\n")).unwrap();
    p
}

#[test]
fn offline_classify_equals_in_process_classify() {
    let dir = tempfile::tempdir().unwrap();
    let policy = WidenPolicy::default();
    let mut app = SimApp::new(AppModel::server(WorkloadSpec::default()), "n0", 9).unwrap();
    let mut db = FaultModelDb::new(reference_kinds(), MatchParams::default());
    let mut dst = Dst::new("n0", 64);
    for (run, fault) in [(2, FaultType::NetworkOutage), (5, FaultType::DiskFull)] {
        let st = build_st(&app.run(run, Some(&FaultSpec::new(fault, run, 9))), policy).unwrap();
        administer(&mut app, &st, fault, &mut db, &mut dst).unwrap();
    }
    let models = dir.path().join("models.db");
    save_db(&models, &db).unwrap();

    let again = recurrence_run(&app, 2);
    let spec = FaultSpec::new(FaultType::NetworkOutage, again, 9);
    let st = build_st(&app.run(again, Some(&spec)), policy).unwrap();
    let unseen = fault_st(0..4, &["elsewhere"]);
    for (i, f) in [st, unseen].into_iter().enumerate() {
        let fault = write_record(dir.path(), &format!("f{i}.st"), &st_to_record(&f));
        let o = selfheal(&[
            "classify",
            "--models",
            path(&models),
            "--fault",
            path(&fault),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let expected = decision_line(&classify(&f, &db, db.params()).decision);
        assert_eq!(stdout(&o).trim_end(), expected);
        if i == 0 {
            assert_eq!(expected, "fix reopen-connection (model network-outage)");
        }
    }
}

#[test]
fn offline_classify_replays_a_mid_simulation_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut config =
        selfheal::harness::SimConfig::load(repo_file("configs/reference.toml")).unwrap();
    // Stop right after the cross-node recurrences.
    config.runs = 20;
    config.faults.retain(|f| f.run < config.runs);
    selfheal::harness::simulate(&config, dir.path()).unwrap();
    let models = dir.path().join("models.db");
    let db = load_db(&models).unwrap();
    let mut checked = 0;
    for n in 0..5 {
        let log = dir.path().join(format!("escalations/node-n{n}.log"));
        for rec in EscalationLog::read(&log).unwrap() {
            let st = st_from_record(&rec.st).unwrap();
            let fault = write_record(dir.path(), "esc.st", &rec.st);
            let o = selfheal(&[
                "classify",
                "--models",
                path(&models),
                "--fault",
                path(&fault),
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            let expected = decision_line(&classify(&st, &db, db.params()).decision);
            assert_eq!(stdout(&o).trim_end(), expected);
            checked += 1;
        }
    }
    assert!(checked >= 3);
}

#[test]
fn empty_model_database_escalates() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models.db");
    save_db(
        &models,
        &FaultModelDb::new(reference_kinds(), MatchParams::default()),
    )
    .unwrap();
    let fault = write_record(dir.path(), "f.st", &st_to_record(&probe()));
    let o = selfheal(&[
        "classify",
        "--models",
        path(&models),
        "--fault",
        path(&fault),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("escalate"), "{}", stdout(&o));
}

#[test]
fn bench_writes_one_row_per_repeat_plus_average() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("b.toml");
    fs::write(
        &config,
        "[bench]\nnodes = 2\nrepeats = 3\nrun_counts = [1, 4]\n",
    )
    .unwrap();
    let table = dir.path().join("table.csv");
    let o = selfheal(&["bench", "--config", path(&config), "--out", path(&table)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(selfheal::harness::METRIC_HEADER));
    let rows: Vec<&str> = lines.collect();
    // 2 run counts x 6 metrics x (3 repeats + average).
    assert_eq!(rows.len(), 2 * 6 * 4);
    let avg = rows
        .iter()
        .filter(|r| r.split(',').nth(1) == Some("avg"))
        .count();
    assert_eq!(avg, 12);
}

#[test]
fn seed_and_mode_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = path(&repo_file("configs/reference.toml")).to_string();
    let mut dsts = Vec::new();
    for (mode, out) in [("full", "full"), ("incremental", "inc")] {
        let out = dir.path().join(out);
        let o = selfheal(&[
            "simulate",
            "--config",
            &config,
            "--seed",
            "4",
            "--mode",
            mode,
            "--out",
            path(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        dsts.push(
            (0..5)
                .map(|n| load_dst(out.join(format!("node-n{n}.dst"))).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    for (a, b) in dsts[0].iter().zip(&dsts[1]) {
        assert!(a.content_eq(b), "{}", a.node());
    }
    let o = selfheal(&["simulate", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inspect_reads_every_store_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = selfheal(&[
        "simulate",
        "--config",
        path(&repo_file("configs/reference.toml")),
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success());
    for (file, head) in [
        ("node-n0.dst", "dst node=n0"),
        ("dk.store", "dk sources=5"),
        ("models.db", "fault models: 3"),
        ("graph.edges", "fault-model graph"),
    ] {
        let o = selfheal(&["inspect", path(&dir.path().join(file))]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        assert!(stdout(&o).starts_with(head), "{file}: {}", stdout(&o));
    }
}
