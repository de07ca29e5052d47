//! Classifies a failure against two fault models. The failure resembles most
//! of the first model's examples, so its fix is chosen.

use selfheal::fault::{classify, FaultKind, FaultModel, FaultModelDb, KindForest, MatchParams};
use selfheal::model::{EntityCategory, EntityKey, SignatureTrace};

fn failure(keys: impl IntoIterator<Item = usize>, call: &str) -> SignatureTrace {
    let mut b = SignatureTrace::builder("n0", 0).calls([call]);
    for i in keys {
        b = b.entity(
            EntityKey::dotted(EntityCategory::FieldValue, &format!("k{i}")),
            0,
        );
    }
    b.fault("observed").build().expect("valid ST")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let forest = KindForest::new([FaultKind::root("app")])?;
    let mut db = FaultModelDb::new(forest, MatchParams::default());
    let mut pool = FaultModel::new("pool-exhausted", "app").with_fix("restart-pool", 3, 4);
    for t in 0..4 {
        pool = pool.with_tagged(failure((0..8).chain([100 + 2 * t, 101 + 2 * t]), "accept"));
    }
    let mut disk = FaultModel::new("disk-full", "app").with_fix("clean-disk", 5, 5);
    for t in 0..3 {
        disk = disk.with_tagged(failure(200 + 3 * t..203 + 3 * t, "write"));
    }
    db.add_model(pool)?;
    db.add_model(disk)?;

    let observed = failure(0..10, "accept");
    let c = classify(&observed, &db, db.params());
    for (fault, r) in &c.results {
        match r.percent {
            Some(p) => println!("{fault}: {} at {p:.0}%", r.category),
            None => println!("{fault}: {}", r.category),
        }
    }
    match c.decision.fix() {
        Some(fix) => println!("apply {fix} ({} comparisons)", c.comparisons),
        None => println!("escalate"),
    }
    Ok(())
}
