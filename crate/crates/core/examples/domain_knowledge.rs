//! Builds the cluster-wide domain knowledge from several node stores, then
//! refreshes a young node's few entries with their more general versions.

use selfheal::model::{build_st, WidenPolicy};
use selfheal::sim::{AppModel, SimApp, WorkloadSpec};
use selfheal::store::{build_dk, refresh_from_dk, Dst, MergePolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut stores = Vec::new();
    for i in 0..3 {
        let node = format!("n{i}");
        let mut app = SimApp::new(AppModel::server(WorkloadSpec::default()), node.as_str(), i)?;
        let mut dst = Dst::new(node.as_str(), 256);
        for run in 0..30 {
            dst.merge_st(build_st(&app.run(run, None), WidenPolicy::default())?);
        }
        stores.push(dst);
    }
    let refs: Vec<&Dst> = stores.iter().collect();
    let dk = build_dk(&refs, 3, 256, MergePolicy::default())?;
    println!(
        "domain knowledge: {} entries from {} sources, mature: {}",
        dk.len(),
        dk.source_count(),
        dk.is_mature()
    );

    let mut young = Dst::new("n9", 256);
    let mut app = SimApp::new(AppModel::server(WorkloadSpec::default()), "n9", 9)?;
    for run in 0..3 {
        young.merge_st(build_st(&app.run(run, None), WidenPolicy::default())?);
    }
    let seen = |d: &Dst| d.sts().map(|s| s.occurrences().total()).sum::<u64>();
    println!(
        "young node: {} entries, {} runs accounted",
        young.len(),
        seen(&young)
    );
    let changed = refresh_from_dk(&mut young, &dk)?;
    println!(
        "after refresh (changed: {changed}): {} entries, {} runs accounted",
        young.len(),
        seen(&young)
    );
    Ok(())
}
