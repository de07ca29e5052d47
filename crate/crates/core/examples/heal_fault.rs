//! A transient fault hits a node, is escalated and fixed by the administrator,
//! and heals on its own when it recurs in the same request context.

use selfheal::fault::{FaultModelDb, MatchParams};
use selfheal::harness::administer;
use selfheal::heal::{on_failure, EscalationLog, HealingConfig};
use selfheal::model::{build_st, WidenPolicy};
use selfheal::sim::{reference_kinds, AppModel, FaultSpec, FaultType, SimApp, WorkloadSpec};
use selfheal::store::Dst;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let policy = WidenPolicy::default();
    let mut app = SimApp::new(AppModel::server(WorkloadSpec::default()), "n0", 4)?;
    let mut dst = Dst::new("n0", 256);
    let mut models = FaultModelDb::new(reference_kinds(), MatchParams::default());
    let mut log = EscalationLog::in_memory();
    let fault = FaultType::DiskFull;
    let first = 10;
    let again = (first + 1..)
        .find(|&r| app.template_for(r) == app.template_for(first))
        .unwrap();

    for run in 0..=again {
        let injected = (run == first || run == again).then(|| FaultSpec::new(fault, run, 12));
        let st = build_st(&app.run(run, injected.as_ref()), policy)?;
        if app.active_fault().is_none() {
            dst.merge_st(st);
            continue;
        }
        let outcome = on_failure(
            &mut app,
            &st,
            &mut dst,
            &mut models,
            &HealingConfig::default(),
            &mut log,
        )?;
        match outcome.healing_fix() {
            Some(fix) => println!(
                "run {run}: healed by {fix} after {} trial(s), {} ticks",
                outcome.trials.len(),
                outcome.elapsed
            ),
            None => {
                println!("run {run}: escalated; the administrator repairs and records it");
                administer(&mut app, &st, fault, &mut models, &mut dst)?;
            }
        }
    }
    println!("escalations logged: {}", log.records().len());
    Ok(())
}
