//! Runs a small benchmark and prints its metric table, then the averaged
//! store size and merge cost per run count.

use selfheal::harness::{bench, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = SimConfig::default();
    config.bench.nodes = 3;
    config.bench.repeats = 2;
    config.bench.run_counts = vec![1, 10, 40];
    let table = bench(&config)?;
    print!("{}", table.to_text());
    for (runs, size, cost) in table.averages("dst-merge-ticks") {
        println!("{runs:>3} runs: {size:.1} entries, {cost:.1} comparisons per merge");
    }
    Ok(())
}
