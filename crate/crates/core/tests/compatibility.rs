mod common;

use common::{beam, LENGTH};
use nalgebra::DMatrix;
use nlcb_core::linalg::to_dense;
use nlcb_core::partition::{partition_model, Partition};
use proptest::prelude::*;

fn compatibility_sum(p: &Partition) -> DMatrix<f64> {
    let rows = p.compatibility[0].nrows();
    let mut sum = DMatrix::zeros(rows, p.n_global);
    for (b, sub) in p.compatibility.iter().zip(&p.substructures) {
        sum += to_dense(b) * sub.localization.dense();
    }
    sum
}

#[test]
fn three_substructure_chain() {
    let model = beam(30, 0.0);
    let cuts = [model.node_near(0.3 * LENGTH), model.node_near(0.7 * LENGTH)];
    let p = partition_model(&model, &[vec![cuts[0]], vec![cuts[1]]]).unwrap();
    assert_eq!(p.substructures.len(), 3);
    assert_eq!(compatibility_sum(&p).amax(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interface_compatibility_cancels_exactly(
        elements in 6usize..60,
        raw_cuts in proptest::collection::btree_set(1usize..1000, 1..4),
        rise in prop_oneof![Just(0.0), 1e-3f64..8e-3],
    ) {
        let model = beam(elements, rise);
        // map to distinct interior nodes that leave at least one free node between cuts
        let mut cuts: Vec<usize> = raw_cuts.iter().map(|c| 2 + c * (elements - 3) / 1000).collect();
        cuts.dedup();
        cuts.retain(|&c| c >= 2 && c <= elements - 2);
        let mut chosen: Vec<usize> = Vec::new();
        for c in cuts {
            if chosen.last().is_none_or(|&last| c >= last + 2) {
                chosen.push(c);
            }
        }
        prop_assume!(!chosen.is_empty());
        let interfaces: Vec<Vec<usize>> = chosen.iter().map(|&c| vec![c]).collect();
        let p = partition_model(&model, &interfaces).unwrap();
        prop_assert_eq!(p.substructures.len(), chosen.len() + 1);
        prop_assert_eq!(compatibility_sum(&p).amax(), 0.0);
        prop_assert_eq!(p.compatibility_residual(), 0.0);
    }
}
