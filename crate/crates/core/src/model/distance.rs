//! Dissimilarity between two signature-traces.
//!
//! `d = w_s * jaccard + w_t * lcs`, where the Jaccard part treats a key as
//! shared only if both sides carry it with overlapping values, and the LCS
//! part is `1 - lcs / max_len` over the method-id sequences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::st::SignatureTrace;
use super::trace::lcs_len;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceWeights {
    pub signature: f64,
    pub trace: f64,
}

impl Default for DistanceWeights {
    fn default() -> Self {
        Self {
            signature: 0.5,
            trace: 0.5,
        }
    }
}

impl DistanceWeights {
    /// Weights rescaled to sum to one; a zero pair falls back to the default.
    pub fn normalized(self) -> Self {
        let sum = self.signature + self.trace;
        if !sum.is_finite() || sum <= 0.0 {
            return Self::default();
        }
        Self {
            signature: self.signature / sum,
            trace: self.trace / sum,
        }
    }
}

/// Jaccard distance over key/value pairs, in `[0, 1]`.
pub fn signature_distance(a: &SignatureTrace, b: &SignatureTrace) -> f64 {
    let (shared, union) = shared_pairs(a, b);
    if union == 0 {
        return 0.0;
    }
    1.0 - shared as f64 / union as f64
}

/// `(keys present on both sides with overlapping values, |keys a ∪ keys b|)`.
pub fn shared_pairs(a: &SignatureTrace, b: &SignatureTrace) -> (usize, usize) {
    let bmap: BTreeMap<_, _> = b.signature().iter().map(|e| (&e.key, &e.value)).collect();
    let mut shared = 0;
    let mut common = 0;
    for e in a.signature() {
        if let Some(v) = bmap.get(&e.key) {
            common += 1;
            if e.value.overlaps(v) {
                shared += 1;
            }
        }
    }
    (shared, a.signature().len() + b.signature().len() - common)
}

/// Number of keys both signatures carry, regardless of value.
pub fn common_keys(a: &SignatureTrace, b: &SignatureTrace) -> usize {
    let bkeys: std::collections::BTreeSet<_> = b.keys().collect();
    a.keys().filter(|k| bkeys.contains(k)).count()
}

/// Normalized LCS distance over method-id sequences, in `[0, 1]`.
pub fn trace_distance(a: &SignatureTrace, b: &SignatureTrace) -> f64 {
    let xs: Vec<_> = a.trace().methods().collect();
    let ys: Vec<_> = b.trace().methods().collect();
    let longest = xs.len().max(ys.len());
    if longest == 0 {
        return 0.0;
    }
    1.0 - lcs_len(&xs, &ys) as f64 / longest as f64
}

pub fn distance(a: &SignatureTrace, b: &SignatureTrace, weights: DistanceWeights) -> f64 {
    let w = weights.normalized();
    let d = w.signature * signature_distance(a, b) + w.trace * trace_distance(a, b);
    d.clamp(0.0, 1.0)
}
