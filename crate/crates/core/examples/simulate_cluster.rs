//! Runs the reference scenario end to end and prints its summary. Pass an
//! output directory to keep the stores, logs and graph it writes.

use std::path::PathBuf;

use selfheal::harness::{simulate, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig::load(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/reference.toml"
    ))?;
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("selfheal-reference"));
    let summary = simulate(&config, &out)?;
    print!("{}", summary.to_text());
    println!(
        "healed {} / escalated {}; files in {}",
        summary.healed(),
        summary.escalated(),
        out.display()
    );
    Ok(())
}
