mod common;

use common::{beam, random_vector, reduction, rng, scaled_direction, THICKNESS};
use nalgebra::DVector;
use nlcb_core::rom::ReducedModel;

/// Central difference with one Richardson step, which is exact for a
/// quartic potential up to roundoff.
fn gradient(rom: &ReducedModel, xi: &DVector<f64>) -> DVector<f64> {
    let h = 1e-3 * xi.amax();
    let diff = |a: usize, h: f64| {
        let mut e = DVector::zeros(rom.m());
        e[a] = h;
        (rom.potential(&(xi + &e)) - rom.potential(&(xi - &e))) / (2.0 * h)
    };
    DVector::from_fn(rom.m(), |a, _| (4.0 * diff(a, h) - diff(a, 2.0 * h)) / 3.0)
}

#[test]
fn reduced_force_is_potential_gradient() {
    let mut r = rng(11);
    for (rise, modes) in [(0.0, 1), (5e-3, 4), (2e-3, 2)] {
        let model = beam(30, rise);
        let red = reduction(&model, &[0.6], modes);
        let rom = &red.nlcb;
        for amplitude in [0.1, 1.0, 10.0] {
            for _ in 0..5 {
                let xi = scaled_direction(&rom.load_map, random_vector(&mut r, rom.m()), amplitude * THICKNESS);
                let f = rom.force(&xi);
                let g = gradient(rom, &xi);
                let err = (&g - &f).amax() / f.amax();
                assert!(err <= 1e-9, "rise {rise}, amplitude {amplitude}: {err:e}");
            }
        }
    }
}
