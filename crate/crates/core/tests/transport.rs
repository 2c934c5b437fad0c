mod support;

use std::f64::consts::PI;

use gkm_core::measure::{bl_distance, circle_distance, CircleMeasure};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn lp_oracle_on_hand_computed_cases() {
    let a = CircleMeasure::dirac(0.0);
    let b = CircleMeasure::dirac(2.0);
    assert!((support::lp_transport(&a, &b) - 2.0).abs() < 1e-15);

    // a half turn split both ways
    let c = CircleMeasure::uniform_atoms(&[PI / 2.0, 1.5 * PI]).unwrap();
    assert!((support::lp_transport(&a, &c) - PI / 2.0).abs() < 1e-15);

    // shorter arc across 0
    let d = CircleMeasure::dirac(6.0);
    assert!((support::lp_transport(&a, &d) - circle_distance(0.0, 6.0)).abs() < 1e-15);

    let e = CircleMeasure::new(vec![0.0, 1.0], vec![0.25, 0.75]).unwrap();
    let f = CircleMeasure::new(vec![0.0, 1.0], vec![0.75, 0.25]).unwrap();
    assert!((support::lp_transport(&e, &f) - 0.5).abs() < 1e-15);
}

#[test]
fn closed_form_matches_lp_on_many_atoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let a = support::random_measure(&mut rng, 8);
        let b = support::random_measure(&mut rng, 8);
        let lp = support::lp_transport(&a, &b);
        assert!((bl_distance(&a, &b) - lp).abs() < 1e-9, "{lp}");
    }
}

proptest! {
    #[test]
    fn closed_form_matches_lp(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = support::random_measure(&mut rng, 6);
        let b = support::random_measure(&mut rng, 6);
        prop_assert!((bl_distance(&a, &b) - support::lp_transport(&a, &b)).abs() < 1e-9);
    }
}
