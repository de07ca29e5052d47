//! Randomized properties of the per-node store.

mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn merging_a_store_with_itself_changes_nothing(d in dst()) {
        check_idempotence(&d)?;
    }

    #[test]
    fn merge_order_does_not_matter(pair in dst_pair()) {
        check_commutativity(&pair)?;
    }

    #[test]
    fn size_stays_within_threshold(script in op_script()) {
        check_size_bound(&script)?;
    }

    #[test]
    fn merged_entries_never_cover_less(pair in dst_pair()) {
        check_generalization(&pair)?;
    }

    #[test]
    fn replica_plus_delta_equals_current(script in op_script()) {
        check_delta_replay(&script)?;
    }
}
