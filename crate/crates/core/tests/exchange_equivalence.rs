//! Incremental sharing ends where full sharing ends.

mod common;

use common::*;
use proptest::prelude::*;
use selfheal::exchange::ShareMode;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn incremental_and_full_sharing_agree(s in schedule()) {
        check_exchange_equivalence(&s)?;
    }

    #[test]
    fn replays_are_bit_identical(s in schedule()) {
        for mode in [ShareMode::Full, ShareMode::Incremental] {
            prop_assert_eq!(play(&s, mode).state_text(), play(&s, mode).state_text());
        }
    }
}

#[test]
fn every_message_is_consumed_within_a_tick() {
    let s = Schedule {
        nodes: 4,
        topology: selfheal::exchange::Topology::Ring,
        share_interval: 1,
        threshold: 8,
        steps: Vec::new(),
    };
    let mut c = play(&s, ShareMode::Incremental);
    for i in 0..4 {
        c.record_st(i, fault_st([i], &["m"]));
        let r = c.tick().unwrap();
        assert_eq!(r.emitted, r.delivered);
        assert_eq!(c.pending(), 0);
    }
}
