//! Shows how an observed value generalizes as runs disagree on it: a concrete
//! value becomes a set, a set past its cap becomes a range, and values of
//! mixed kinds become `any`.

use selfheal::model::{widen, GeneralizedValue, WidenPolicy};

fn main() {
    let policy = WidenPolicy { set_cap: 3 };
    let mut v = GeneralizedValue::concrete(4);
    println!("start: {v}");
    for x in [4, 5, 6, 9] {
        v = widen(&v, &GeneralizedValue::concrete(x), policy);
        println!("after {x}: {v} (widened {} times)", v.widen_count());
    }
    let mixed = widen(&v, &GeneralizedValue::concrete("text"), policy);
    println!("after \"text\": {mixed}");
    assert!(mixed.covers(&v) && mixed.is_any());
}
