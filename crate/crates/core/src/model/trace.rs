//! Execution traces: the ordered method invocations of one run.

use serde::{Deserialize, Serialize};

use super::ids::MethodId;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub method: MethodId,
    pub depth: u32,
    pub seq: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    /// Call stack at the point of failure, outermost first. Present iff the
    /// run faulted.
    #[serde(rename = "stack", default, skip_serializing_if = "Option::is_none")]
    pub terminal_stack: Option<Vec<MethodId>>,
}

impl Trace {
    pub fn methods(&self) -> impl Iterator<Item = &MethodId> + '_ {
        self.events.iter().map(|e| &e.method)
    }

    /// Method sequence with consecutive repeats folded into one.
    pub fn collapsed_methods(&self) -> Vec<&MethodId> {
        let mut out: Vec<&MethodId> = Vec::with_capacity(self.events.len());
        for m in self.methods() {
            if out.last() != Some(&m) {
                out.push(m);
            }
        }
        out
    }

    /// The trace with consecutive repeats (same method, same depth) folded
    /// and sequence numbers renumbered from zero.
    pub fn collapsed(&self) -> Trace {
        let mut events: Vec<TraceEvent> = Vec::with_capacity(self.events.len());
        for e in &self.events {
            if events
                .last()
                .is_some_and(|l| l.method == e.method && l.depth == e.depth)
            {
                continue;
            }
            events.push(TraceEvent {
                method: e.method.clone(),
                depth: e.depth,
                seq: events.len() as u64,
            });
        }
        Trace {
            events,
            terminal_stack: self.terminal_stack.clone(),
        }
    }

    /// True when `self`'s method sequence occurs contiguously inside `other`'s.
    pub fn is_contiguous_in(&self, other: &Trace) -> bool {
        let needle: Vec<&MethodId> = self.methods().collect();
        let hay: Vec<&MethodId> = other.methods().collect();
        if needle.is_empty() {
            return true;
        }
        hay.windows(needle.len()).any(|w| w == needle.as_slice())
    }
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(m: &str, depth: u32, seq: u64) -> TraceEvent {
        TraceEvent {
            method: MethodId::new(m),
            depth,
            seq,
        }
    }

    #[test]
    fn lcs_small_cases() {
        assert_eq!(lcs_len(b"ABCBDAB", b"BDCABA"), 4);
        assert_eq!(lcs_len::<u8>(b"", b"abc"), 0);
        assert_eq!(lcs_len(b"abc", b"abc"), 3);
        assert_eq!(lcs_len(b"abc", b"xyz"), 0);
    }

    #[test]
    fn collapse_folds_repeats_only_when_adjacent() {
        let t = Trace {
            events: vec![ev("a", 0, 0), ev("b", 1, 1), ev("b", 1, 2), ev("a", 0, 3)],
            terminal_stack: None,
        };
        let names: Vec<&str> = t.collapsed_methods().iter().map(|m| m.as_str()).collect();
        assert_eq!(names, ["a", "b", "a"]);
        let c = t.collapsed();
        assert_eq!(c.events.len(), 3);
        assert_eq!(c.events[2].seq, 2);
    }

    #[test]
    fn contiguous_subsequence() {
        let hay = Trace {
            events: vec![ev("a", 0, 0), ev("b", 1, 1), ev("c", 2, 2)],
            terminal_stack: None,
        };
        let needle = Trace {
            events: vec![ev("b", 1, 5), ev("c", 2, 6)],
            terminal_stack: None,
        };
        let gap = Trace {
            events: vec![ev("a", 0, 5), ev("c", 2, 6)],
            terminal_stack: None,
        };
        assert!(needle.is_contiguous_in(&hay));
        assert!(!gap.is_contiguous_in(&hay));
    }
}
