mod common;

use common::{beam, reduction};
use nlcb_core::linalg::principal_angles;
use nlcb_core::rom::classic_cb;
use proptest::prelude::*;

fn max_angle(elements: usize, rise: f64, cut: f64, modes: usize) -> f64 {
    let model = beam(elements, rise);
    let r = reduction(&model, &[cut], modes);
    let mut worst: f64 = 0.0;
    for ((sub, basis), manifold) in r.partition.substructures.iter().zip(&r.bases).zip(&r.manifolds) {
        let cb = classic_cb(sub, basis);
        for a in principal_angles(&manifold.linear, &cb.linear) {
            worst = worst.max(a);
        }
    }
    worst
}

#[test]
fn flat_and_curved_reference_cases() {
    for (rise, modes) in [(0.0, 1), (5e-3, 4)] {
        let a = max_angle(40, rise, 0.6, modes);
        assert!(a < 1e-8, "rise {rise}: largest principal angle {a:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_manifold_spans_craig_bampton_basis(
        elements in 12usize..40,
        rise in 0.0f64..6e-3,
        cut in 0.25f64..0.75,
        modes in 1usize..4,
    ) {
        let a = max_angle(elements, rise, cut, modes);
        prop_assert!(a < 1e-8, "largest principal angle {:e}", a);
    }
}
