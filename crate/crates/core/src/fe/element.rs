//! Two-node planar von Kármán beam element with shallow initial elevation.
//!
//! Nodal DoFs are `(u, w, θ)` per node: axial displacement, transverse
//! displacement and rotation about the out-of-plane `y` axis, so that
//! `θ = -dw/dx`. Axial displacement is interpolated linearly and the
//! transverse displacement with cubic Hermite polynomials. The initial
//! elevation `w0` is interpolated linearly between the nodes.
//!
//! The strain energy is
//!
//! ```text
//! U = 1/2 ∫ EA ε² dx + 1/2 ∫ EI (w'')² dx,   ε = u' + w0' w' + 1/2 (w')²
//! ```
//!
//! integrated with 2 Gauss points for the membrane part and 3 for bending.
//! Because `ε` is quadratic in the nodal vector, the elastic force is an exact
//! cubic polynomial `K d + K2:(d⊗d) + K3⋮(d⊗d⊗d)` with fully symmetric tensors.

use nalgebra::{Matrix6, Vector6};

use super::{Material, Section};
use crate::tensor::{Tensor3, Tensor4};
use crate::{Error, Result};

pub const ELEMENT_DOFS: usize = 6;

const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];
const GAUSS4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_7, 0.173_927_422_568_726_9),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_1),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_1),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_9),
];

/// End-node coordinates `(x, z)` of one element; `z` is the initial elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

/// Exact operators of one element.
#[derive(Debug, Clone)]
pub struct ElementTensors {
    pub stiffness: Matrix6<f64>,
    pub mass: Matrix6<f64>,
    pub k2: Tensor3,
    pub k3: Tensor4,
}

impl ElementTensors {
    /// `Ke d + K2e:(d⊗d) + K3e⋮(d⊗d⊗d)`.
    pub fn force(&self, d: &[f64; ELEMENT_DOFS]) -> Vector6<f64> {
        let lin = self.stiffness * Vector6::from_column_slice(d);
        let quad = self.k2.contract2(d, d);
        let cub = self.k3.contract3(d, d, d);
        lin + Vector6::from_iterator(quad.iter().zip(cub.iter()).map(|(a, b)| a + b))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BeamElement {
    length: f64,
    slope0: f64,
    ea: f64,
    ei: f64,
    rho_a: f64,
}

impl BeamElement {
    pub fn new(geom: &ElementGeometry, section: &Section, material: &Material) -> Result<Self> {
        let (x1, z1) = geom.start;
        let (x2, z2) = geom.end;
        let bad = |reason: &str| Error::InvalidElement {
            element: usize::MAX,
            reason: reason.to_string(),
        };
        if ![x1, z1, x2, z2].iter().all(|v| v.is_finite()) {
            return Err(bad("non-finite nodal coordinates"));
        }
        let length = x2 - x1;
        if length.abs() <= f64::EPSILON * x1.abs().max(x2.abs()).max(1.0) {
            return Err(bad("zero-length element"));
        }
        if length < 0.0 {
            return Err(bad("element nodes must be ordered along +x"));
        }
        Ok(Self {
            length,
            slope0: (z2 - z1) / length,
            ea: material.youngs_modulus * section.area(),
            ei: material.youngs_modulus * section.second_moment(),
            rho_a: material.density * section.area(),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Slope of the initial elevation, `w0'`.
    pub fn initial_slope(&self) -> f64 {
        self.slope0
    }

    fn axial_gradient(&self) -> [f64; 6] {
        let l = self.length;
        [-1.0 / l, 0.0, 0.0, 1.0 / l, 0.0, 0.0]
    }

    /// Row vectors mapping `d` to `w'` and `w''` at `s ∈ [0, 1]`.
    fn transverse_derivatives(&self, s: f64) -> ([f64; 6], [f64; 6]) {
        let l = self.length;
        let d1 = -6.0 * s + 6.0 * s * s;
        let d2 = l * (1.0 - 4.0 * s + 3.0 * s * s);
        let d3 = 6.0 * s - 6.0 * s * s;
        let d4 = l * (-2.0 * s + 3.0 * s * s);
        let g = [0.0, d1 / l, -d2 / l, 0.0, d3 / l, -d4 / l];
        let l2 = l * l;
        let c1 = -6.0 + 12.0 * s;
        let c2 = l * (-4.0 + 6.0 * s);
        let c3 = 6.0 - 12.0 * s;
        let c4 = l * (-2.0 + 6.0 * s);
        let h = [0.0, c1 / l2, -c2 / l2, 0.0, c3 / l2, -c4 / l2];
        (g, h)
    }

    fn transverse_shape(&self, s: f64) -> [f64; 6] {
        let l = self.length;
        let n1 = 1.0 - 3.0 * s * s + 2.0 * s * s * s;
        let n2 = l * (s - 2.0 * s * s + s * s * s);
        let n3 = 3.0 * s * s - 2.0 * s * s * s;
        let n4 = l * (-s * s + s * s * s);
        [0.0, n1, -n2, 0.0, n3, -n4]
    }

    /// Membrane Gauss-point data: weight·L, `b = u' + w0' w'` row, `g = w'` row.
    fn membrane_points(&self) -> impl Iterator<Item = (f64, [f64; 6], [f64; 6])> + '_ {
        let a = self.axial_gradient();
        GAUSS2.iter().map(move |&(s, w)| {
            let (g, _) = self.transverse_derivatives(s);
            let mut b = a;
            for k in 0..6 {
                b[k] += self.slope0 * g[k];
            }
            (w * self.length, b, g)
        })
    }

    fn bending_points(&self) -> impl Iterator<Item = (f64, [f64; 6])> + '_ {
        GAUSS3.iter().map(move |&(s, w)| {
            let (_, h) = self.transverse_derivatives(s);
            (w * self.length, h)
        })
    }

    pub fn strain_energy(&self, d: &[f64; 6]) -> f64 {
        let mut u = 0.0;
        for (wl, b, g) in self.membrane_points() {
            let gd = dot(&g, d);
            let eps = dot(&b, d) + 0.5 * gd * gd;
            u += wl * 0.5 * self.ea * eps * eps;
        }
        for (wl, h) in self.bending_points() {
            let kappa = dot(&h, d);
            u += wl * 0.5 * self.ei * kappa * kappa;
        }
        u
    }

    /// Elastic force `∂U/∂d`, evaluated pointwise from the strain at the
    /// Gauss points.
    pub fn internal_force(&self, d: &[f64; 6]) -> Vector6<f64> {
        let mut f = Vector6::zeros();
        for (wl, b, g) in self.membrane_points() {
            let gd = dot(&g, d);
            let eps = dot(&b, d) + 0.5 * gd * gd;
            let c = wl * self.ea * eps;
            for k in 0..6 {
                f[k] += c * (b[k] + gd * g[k]);
            }
        }
        for (wl, h) in self.bending_points() {
            let c = wl * self.ei * dot(&h, d);
            for k in 0..6 {
                f[k] += c * h[k];
            }
        }
        f
    }

    pub fn tangent_stiffness(&self, d: &[f64; 6]) -> Matrix6<f64> {
        let mut kt = Matrix6::zeros();
        for (wl, b, g) in self.membrane_points() {
            let gd = dot(&g, d);
            let eps = dot(&b, d) + 0.5 * gd * gd;
            let mut bt = [0.0; 6];
            for k in 0..6 {
                bt[k] = b[k] + gd * g[k];
            }
            for i in 0..6 {
                for j in 0..6 {
                    kt[(i, j)] += wl * self.ea * (bt[i] * bt[j] + eps * g[i] * g[j]);
                }
            }
        }
        add_bending(&mut kt, self);
        kt
    }

    pub fn stiffness(&self) -> Matrix6<f64> {
        let mut k = Matrix6::zeros();
        for (wl, b, _) in self.membrane_points() {
            for i in 0..6 {
                for j in 0..6 {
                    k[(i, j)] += wl * self.ea * b[i] * b[j];
                }
            }
        }
        add_bending(&mut k, self);
        k
    }

    /// Consistent mass (axial and transverse translational inertia).
    pub fn mass(&self) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        for &(s, w) in &GAUSS4 {
            let nu = [1.0 - s, 0.0, 0.0, s, 0.0, 0.0];
            let nw = self.transverse_shape(s);
            let c = w * self.length * self.rho_a;
            for i in 0..6 {
                for j in 0..6 {
                    m[(i, j)] += c * (nu[i] * nu[j] + nw[i] * nw[j]);
                }
            }
        }
        m
    }

    /// Quadratic force tensor, fully symmetric.
    pub fn quadratic_tensor(&self) -> Tensor3 {
        let mut t = Tensor3::cube(6);
        for (wl, b, g) in self.membrane_points() {
            let c = 0.5 * wl * self.ea;
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        let v = b[i] * g[j] * g[k] + g[i] * b[j] * g[k] + g[i] * g[j] * b[k];
                        if v != 0.0 {
                            t.add(i, j, k, c * v);
                        }
                    }
                }
            }
        }
        t
    }

    /// Cubic force tensor, fully symmetric.
    pub fn cubic_tensor(&self) -> Tensor4 {
        let mut t = Tensor4::cube(6);
        for (wl, _, g) in self.membrane_points() {
            let c = 0.5 * wl * self.ea;
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        for l in 0..6 {
                            let v = g[i] * g[j] * g[k] * g[l];
                            if v != 0.0 {
                                t.add(i, j, k, l, c * v);
                            }
                        }
                    }
                }
            }
        }
        t
    }

    pub fn tensors(&self) -> ElementTensors {
        ElementTensors {
            stiffness: self.stiffness(),
            mass: self.mass(),
            k2: self.quadratic_tensor(),
            k3: self.cubic_tensor(),
        }
    }

    /// Consistent nodal loads of a uniform transverse line load `q` [N/m].
    pub fn line_load(&self, q: f64) -> Vector6<f64> {
        let mut f = Vector6::zeros();
        for &(s, w) in &GAUSS4 {
            let nw = self.transverse_shape(s);
            for k in 0..6 {
                f[k] += w * self.length * q * nw[k];
            }
        }
        f
    }
}

fn add_bending(k: &mut Matrix6<f64>, el: &BeamElement) {
    for (wl, h) in el.bending_points() {
        for i in 0..6 {
            for j in 0..6 {
                k[(i, j)] += wl * el.ei * h[i] * h[j];
            }
        }
    }
}

#[inline]
fn dot(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact element operators for the given geometry.
pub fn element_operators(
    geom: &ElementGeometry,
    section: &Section,
    material: &Material,
) -> Result<ElementTensors> {
    Ok(BeamElement::new(geom, section, material)?.tensors())
}
