#![allow(dead_code)]

use clearing_core::SystemParams;
use proptest::prelude::*;

pub fn p1() -> SystemParams {
    SystemParams::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 2.0], 3.0).unwrap()
}

pub fn p2() -> SystemParams {
    SystemParams::new(vec![1.0, 1.0], vec![1.0, 3.0], vec![0.0, 0.0], vec![5.0, 1.0], 3.0).unwrap()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Models drawn from the sweep ranges: `n` in {1, 2, 3, 5}, rates, diffusions
/// and weights in [0.1, 10], transport costs in [0, 5], fixed cost in [0.5, 20].
pub fn system() -> impl Strategy<Value = SystemParams> {
    prop::sample::select(vec![1usize, 2, 3, 5])
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.1f64..10.0, n),
                prop::collection::vec(0.1f64..10.0, n),
                prop::collection::vec(0.0f64..5.0, n),
                prop::collection::vec(0.1f64..10.0, n),
                0.5f64..20.0,
            )
        })
        .prop_map(|(d, s, c, w, a)| SystemParams::new(d, s, c, w, a).unwrap())
}
