//! Five nodes on a ring share their stores incrementally until every node
//! holds the same knowledge.

use selfheal::exchange::{Cluster, ClusterConfig, ShareMode, Topology};
use selfheal::model::{build_st, WidenPolicy};
use selfheal::sim::{AppModel, SimApp, WorkloadSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ClusterConfig {
        nodes: 5,
        topology: Topology::Ring,
        share_interval: 2,
        mode: ShareMode::Incremental,
        ..ClusterConfig::default()
    };
    let mut cluster = Cluster::new(config)?;
    let mut apps = (0..5)
        .map(|i| {
            SimApp::new(
                AppModel::server(WorkloadSpec::default()),
                format!("n{i}"),
                3,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    for run in 0..20 {
        for (i, app) in apps.iter_mut().enumerate() {
            cluster.record_st(i, build_st(&app.run(run, None), WidenPolicy::default())?);
        }
        cluster.tick()?;
    }
    let mut rounds = 0;
    while !cluster.convergence_check()? {
        cluster.round()?;
        rounds += 1;
    }
    println!("converged after {rounds} extra rounds");
    for node in cluster.nodes() {
        println!("  {} holds {} entries", node.id(), node.dst().len());
    }
    let s = cluster.stats();
    println!(
        "messages={} snapshots={} deltas={} records-sent={}",
        s.messages, s.snapshots, s.deltas, s.records_sent
    );
    Ok(())
}
