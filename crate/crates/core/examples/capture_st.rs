//! Captures one run of the simulated server as a signature-trace and prints
//! its signature, its call trace and its serialized record.

use selfheal::model::{build_st, st_to_record, WidenPolicy};
use selfheal::sim::{AppModel, SimApp, WorkloadSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut app = SimApp::new(AppModel::server(WorkloadSpec::default()), "n0", 7)?;
    let record = app.run(0, None);
    let st = build_st(&record, WidenPolicy::default())?;

    println!("outcome: {:?}", st.outcome());
    println!("signature ({} entities):", st.signature().len());
    for e in st.signature() {
        println!(
            "  {} = {} (seen {}x)",
            e.key,
            e.value,
            e.occurrences.total()
        );
    }
    let methods: Vec<String> = st.trace().methods().map(|m| m.to_string()).collect();
    println!("trace ({} calls): {}", methods.len(), methods.join(" "));
    println!("record: {}", st_to_record(&st));
    Ok(())
}
