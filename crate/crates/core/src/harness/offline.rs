//! Working with persisted stores outside a simulation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{io_err, HarnessError};
use crate::fault::{classify, db_from_text, load_db, Classification, Decision, FaultModelDb};
use crate::model::{st_from_record, SignatureTrace};
use crate::store::{dk_from_text, dst_from_text};

/// Classifies the first ST record in `fault_path` against a saved
/// fault-model database.
pub fn classify_offline(
    models_path: &Path,
    fault_path: &Path,
) -> Result<Classification, HarnessError> {
    let db = load_db(models_path)?;
    let text = fs::read_to_string(fault_path).map_err(io_err(fault_path))?;
    let (line, record) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| HarnessError::BadRecord {
            path: fault_path.to_path_buf(),
            line: 1,
            reason: "no ST record".into(),
        })?;
    let st = st_from_record(record).map_err(|e| HarnessError::BadRecord {
        path: fault_path.to_path_buf(),
        line: line + 1,
        reason: e.to_string(),
    })?;
    Ok(classify(&st, &db, db.params()))
}

/// One-line rendering of a classifier decision.
pub fn decision_line(d: &Decision) -> String {
    match d {
        Decision::Fix {
            fix,
            model,
            borrowed_from: None,
        } => format!("fix {fix} (model {model})"),
        Decision::Fix {
            fix,
            model,
            borrowed_from: Some(from),
        } => format!("fix {fix} (model {model}, borrowed from {from})"),
        Decision::Escalate { reason } => format!("escalate ({reason})"),
    }
}

fn describe_st(out: &mut String, label: &str, st: &SignatureTrace) {
    let outcome = match st.outcome().fault_id() {
        Some(f) => format!("fault {f}"),
        None => "stable".to_string(),
    };
    let _ = writeln!(
        out,
        "{label} occurrences={} {outcome} keys={} calls={}",
        st.occurrences().total(),
        st.signature().len(),
        st.trace().events.len()
    );
    let methods: Vec<&str> = st
        .trace()
        .collapsed_methods()
        .into_iter()
        .map(|m| m.as_str())
        .collect();
    let _ = writeln!(out, "  trace {}", methods.join(" > "));
    if let Some(stack) = &st.trace().terminal_stack {
        let s: Vec<&str> = stack.iter().map(|m| m.as_str()).collect();
        let _ = writeln!(out, "  stack {}", s.join(" > "));
    }
    for f in st.fixes() {
        let _ = writeln!(out, "  fix {} {}/{}", f.fix, f.successes, f.attempts);
    }
}

fn describe_db(out: &mut String, db: &FaultModelDb) {
    let p = db.params();
    let _ = writeln!(
        out,
        "fault models: {} (eps {}, eps_exact {})",
        db.len(),
        p.eps,
        p.eps_exact
    );
    for m in db.models() {
        let _ = writeln!(
            out,
            "model {} kind={} tagged={}",
            m.fault(),
            m.kind(),
            m.tagged().len()
        );
        for f in m.fixes() {
            let _ = writeln!(out, "  fix {} {}/{}", f.fix, f.successes, f.attempts);
        }
    }
    let _ = writeln!(out, "graph edges: {}", db.graph().edges().len());
}

/// Human-readable dump of any persisted store, detected from its header.
pub fn inspect(path: &Path) -> Result<String, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let first = text.lines().next().unwrap_or_default();
    let bad = |reason: &str| HarnessError::BadRecord {
        path: path.to_path_buf(),
        line: 1,
        reason: reason.to_string(),
    };
    let mut out = String::new();
    if first == "node_a,node_b,category,weight" {
        let _ = writeln!(out, "fault-model graph, {} edges", text.lines().count() - 1);
        for l in text.lines().skip(1) {
            let f: Vec<&str> = l.split(',').collect();
            if let [a, b, cat, w] = f.as_slice() {
                let _ = writeln!(out, "{a} -- {b}: {cat} {w}");
            }
        }
        return Ok(out);
    }
    let header: serde_json::Value =
        serde_json::from_str(first).map_err(|_| bad("not a store header"))?;
    match header.get("store").and_then(|s| s.as_str()) {
        Some("dst") => {
            let dst = dst_from_text(&text)?;
            let _ = writeln!(
                out,
                "dst node={} version={} threshold={} entries={}",
                dst.node(),
                dst.version(),
                dst.threshold(),
                dst.len()
            );
            for e in dst.entries() {
                describe_st(&mut out, &e.id().to_string(), e.st());
            }
        }
        Some("dk") => {
            let dk = dk_from_text(&text)?;
            let _ = writeln!(
                out,
                "dk sources={} min-sources={} mature={} threshold={} entries={}",
                dk.source_count(),
                dk.min_sources(),
                dk.is_mature(),
                dk.threshold(),
                dk.len()
            );
            for (i, st) in dk.entries().iter().enumerate() {
                describe_st(&mut out, &format!("#{i}"), st);
            }
        }
        Some("fault-models") => describe_db(&mut out, &db_from_text(&text)?),
        _ => return Err(bad("unknown store kind")),
    }
    Ok(out)
}
