mod common;

use common::{beam, reduction, scaled_direction, THICKNESS};
use nalgebra::DVector;
use nlcb_core::linalg::generalized_eigen_dense;
use nlcb_core::tint::{integrate, InitialState, IntegratorConfig, RomSystem};

#[test]
fn undamped_free_vibration_conserves_energy() {
    for (rise, modes) in [(0.0, 1), (5e-3, 4)] {
        let model = beam(40, rise);
        let red = reduction(&model, &[0.6], modes);
        let rom = &red.nlcb;
        assert_eq!(rom.damping.amax(), 0.0);
        let (omega2, vecs) = generalized_eigen_dense(&rom.stiffness, &rom.mass).unwrap();
        // release from a mix of the two lowest linear modes
        let shape: DVector<f64> = vecs.column(0) + vecs.column(1) * 0.5;
        let x0 = scaled_direction(&rom.load_map, shape, THICKNESS);
        let period = 2.0 * std::f64::consts::PI / omega2[0].sqrt();
        let fastest = 2.0 * std::f64::consts::PI / omega2[1].sqrt();
        let dt = (period / 100.0).min(fastest / 50.0);
        let cfg = IntegratorConfig::new(dt, 10.0 * period);
        let init = InitialState {
            x: x0,
            v: DVector::zeros(rom.m()),
        };
        let hist = integrate(&mut RomSystem { rom }, &cfg, &init, &|_| DVector::zeros(rom.m())).unwrap();
        let e0 = hist.audit[0].kinetic + hist.audit[0].potential;
        let drift = hist
            .audit
            .iter()
            .map(|e| ((e.kinetic + e.potential) - e0).abs() / e0)
            .fold(0.0, f64::max);
        println!("rise {rise}, dt {dt:e}: max relative energy drift {drift:e}");
        assert!(drift < 1e-4, "rise {rise}: drift {drift:e}");
    }
}
