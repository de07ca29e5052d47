//! Builds the fault-model graph for a few related faults and prints its
//! edges: kind links plus similarity edges between faults that look alike.

use selfheal::fault::{FaultModel, FaultModelDb, MatchParams};
use selfheal::model::{EntityCategory, EntityKey, SignatureTrace};
use selfheal::sim::{reference_kinds, FaultType};

fn failure(keys: std::ops::Range<usize>) -> SignatureTrace {
    let mut b = SignatureTrace::builder("n0", 0).calls(["serve"]);
    for i in keys {
        b = b.entity(
            EntityKey::dotted(EntityCategory::ObjectState, &format!("s{i}")),
            1,
        );
    }
    b.fault("observed").build().expect("valid ST")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut db = FaultModelDb::new(reference_kinds(), MatchParams::default());
    for k in db.forest().kinds() {
        match &k.parent {
            Some(p) => println!("kind {} under {p}", k.id),
            None => println!("kind {} (root)", k.id),
        }
    }
    let faults = [
        ("net-a", FaultType::NetworkOutage, 0..10),
        ("net-b", FaultType::NetworkOutage, 1..11),
        ("disk-a", FaultType::DiskFull, 50..60),
    ];
    for (id, fault, keys) in faults {
        let model = FaultModel::new(id, fault.kind()).with_tagged(failure(keys));
        db.add_model(model.with_fix("reset", 1, 1))?;
    }
    print!("{}", db.graph().to_edge_list());
    println!("acyclic: {}", db.graph().is_acyclic());
    Ok(())
}
