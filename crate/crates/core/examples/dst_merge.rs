//! Folds many runs into a node's store. Runs that look alike merge into one
//! generalized entry, so the store grows far slower than the run count. Two
//! stores then merge into one.

use selfheal::model::{build_st, WidenPolicy};
use selfheal::sim::{AppModel, SimApp, WorkloadSpec};
use selfheal::store::Dst;

fn fill(node: &str, seed: u64, runs: u64) -> Result<Dst, Box<dyn std::error::Error>> {
    let mut app = SimApp::new(AppModel::server(WorkloadSpec::default()), node, seed)?;
    let mut dst = Dst::new(node, 256);
    for run in 0..runs {
        dst.merge_st(build_st(&app.run(run, None), WidenPolicy::default())?);
        if [1, 10, 50, 200].contains(&(run + 1)) {
            println!("{node}: {:>3} runs -> {:>2} entries", run + 1, dst.len());
        }
    }
    Ok(dst)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut a = fill("n0", 1, 200)?;
    let b = fill("n1", 2, 200)?;
    a.merge_dst(&b);
    println!("merged store: {} entries", a.len());
    for e in a.entries().iter().take(3) {
        let occ: Vec<String> = e
            .st()
            .occurrences()
            .iter()
            .map(|(n, c)| format!("{n}:{c}"))
            .collect();
        println!("  entry {} seen {}", e.id(), occ.join(" "));
    }
    Ok(())
}
