//! Deterministic work counters used as the cost unit for benchmarks.

use std::ops::AddAssign;

/// Abstract work performed by an operation. Machine independent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkMeter {
    /// Pairwise ST comparisons (equivalence checks or distance evaluations).
    pub comparisons: u64,
    /// Probe events consumed while collecting signature-traces.
    pub probe_events: u64,
    /// Signature values touched while generalizing.
    pub widenings: u64,
    /// Store merges performed, of an ST or of a whole peer store.
    pub merges: u64,
}

impl WorkMeter {
    pub fn new() -> Self {
        Self::default()
    }
}

impl AddAssign for WorkMeter {
    fn add_assign(&mut self, rhs: Self) {
        self.comparisons += rhs.comparisons;
        self.probe_events += rhs.probe_events;
        self.widenings += rhs.widenings;
        self.merges += rhs.merges;
    }
}
