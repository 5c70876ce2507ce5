#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nlcb_core::fe::{BeamGeometry, Material, Model, Rayleigh};
use nlcb_core::rom::{reduce, BuildOptions, Reduction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LENGTH: f64 = 0.1;
pub const THICKNESS: f64 = 0.5e-3;

pub fn beam(elements: usize, rise: f64) -> Model {
    Model::clamped_beam(
        &BeamGeometry {
            length: LENGTH,
            width: 5e-3,
            thickness: THICKNESS,
            elements,
            rise,
        },
        Material::new(210e9, 7800.0, 0.33).unwrap(),
        Rayleigh::default(),
    )
    .unwrap()
}

/// Reduction with one interface node per cut fraction.
pub fn reduction(model: &Model, cuts: &[f64], modes: usize) -> Reduction {
    let nodes: Vec<Vec<usize>> = cuts.iter().map(|c| vec![model.node_near(c * LENGTH)]).collect();
    let opts = BuildOptions {
        modes_per_substructure: modes,
        ..Default::default()
    };
    reduce(model, &nodes, &opts).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    println!("seed = {seed}");
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Rescales `v` so that the linear displacement `‖L v‖∞` equals `amplitude`.
pub fn scaled_direction(linear: &DMatrix<f64>, v: DVector<f64>, amplitude: f64) -> DVector<f64> {
    let size = (linear * &v).amax();
    v * (amplitude / size)
}

/// Random directions scaled to ten beam thicknesses of linear displacement.
pub fn slope_directions(linear: &DMatrix<f64>, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let v = random_vector(&mut r, linear.ncols());
            scaled_direction(linear, v, 10.0 * THICKNESS)
        })
        .collect()
}
