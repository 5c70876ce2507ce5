use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix6};
use nalgebra_sparse::CscMatrix;

use super::element::ELEMENT_DOFS;
use super::Model;
use crate::linalg::{csc_combination, csc_from_triplets, SparseCholesky};
use crate::{Error, Result};

/// An element of a [`Domain`] with its DoFs expressed in domain numbering;
/// `None` marks a constrained DoF.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainElement {
    pub element: usize,
    pub dofs: [Option<usize>; ELEMENT_DOFS],
}

/// A set of elements together with a numbering of their DoFs. The whole
/// model and each substructure are domains.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub n: usize,
    pub elements: Vec<DomainElement>,
}

pub struct GlobalOperators {
    pub mass: CscMatrix<f64>,
    pub stiffness: CscMatrix<f64>,
    pub damping: CscMatrix<f64>,
    /// False when the constrained stiffness failed to factorize (free rigid
    /// body motion).
    pub stiffness_definite: bool,
}

/// Mass, stiffness and Rayleigh damping over the model's free DoFs.
pub fn assemble_global(model: &Model) -> GlobalOperators {
    let domain = model.full_domain();
    let mass = domain.mass(model);
    let stiffness = domain.stiffness(model);
    let stiffness_definite = SparseCholesky::factor(&stiffness).is_ok();
    if !stiffness_definite {
        log::warn!("assembled stiffness is not positive definite");
    }
    let r = model.rayleigh();
    let damping = csc_combination(&[(r.alpha, &mass), (r.beta, &stiffness)]);
    GlobalOperators {
        mass,
        stiffness,
        damping,
        stiffness_definite,
    }
}

impl Domain {
    pub fn gather(&self, de: &DomainElement, x: &DVector<f64>) -> [f64; ELEMENT_DOFS] {
        de.dofs.map(|d| d.map_or(0.0, |i| x[i]))
    }

    fn check_len(&self, x: &DVector<f64>, context: &'static str) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Sums the symmetric parts of element matrices into a sparse matrix.
    /// Only the upper triangle is accumulated and then mirrored, so the result
    /// is exactly symmetric and independent of the DoF numbering.
    fn assemble_matrix(&self, mut element_matrix: impl FnMut(&DomainElement) -> Matrix6<f64>) -> CscMatrix<f64> {
        let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for de in &self.elements {
            let ke = element_matrix(de);
            for (a, ra) in de.dofs.iter().enumerate() {
                let Some(i) = *ra else { continue };
                for (b, rb) in de.dofs.iter().enumerate() {
                    match *rb {
                        Some(j) if i <= j => {
                            *upper.entry((i, j)).or_insert(0.0) += 0.5 * (ke[(a, b)] + ke[(b, a)])
                        }
                        _ => {}
                    }
                }
            }
        }
        let trip = upper.into_iter().flat_map(|((i, j), v)| {
            let mirror = (i != j).then_some((j, i, v));
            std::iter::once((i, j, v)).chain(mirror)
        });
        csc_from_triplets(self.n, self.n, trip)
    }

    fn scatter(&self, de: &DomainElement, fe: &[f64], out: &mut DVector<f64>) {
        for (a, r) in de.dofs.iter().enumerate() {
            if let Some(i) = *r {
                out[i] += fe[a];
            }
        }
    }

    pub fn mass(&self, model: &Model) -> CscMatrix<f64> {
        self.assemble_matrix(|de| model.element_tensors(de.element).mass)
    }

    pub fn stiffness(&self, model: &Model) -> CscMatrix<f64> {
        self.assemble_matrix(|de| model.element_tensors(de.element).stiffness)
    }

    pub fn damping(&self, model: &Model) -> CscMatrix<f64> {
        let r = model.rayleigh();
        self.assemble_matrix(|de| {
            let t = model.element_tensors(de.element);
            t.mass * r.alpha + t.stiffness * r.beta
        })
    }

    /// Full elastic force `K d + f(d)`.
    pub fn internal_force(&self, model: &Model, d: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(d, "internal force")?;
        let mut f = DVector::zeros(self.n);
        for de in &self.elements {
            let de_vals = self.gather(de, d);
            let fe = if model.is_linear() {
                model.element_tensors(de.element).stiffness * nalgebra::Vector6::from_column_slice(&de_vals)
            } else {
                model.element_kernel(de.element).internal_force(&de_vals)
            };
            self.scatter(de, fe.as_slice(), &mut f);
        }
        Ok(f)
    }

    pub fn tangent_stiffness(&self, model: &Model, d: &DVector<f64>) -> Result<CscMatrix<f64>> {
        self.check_len(d, "tangent stiffness")?;
        Ok(self.assemble_matrix(|de| {
            if model.is_linear() {
                model.element_tensors(de.element).stiffness
            } else {
                model
                    .element_kernel(de.element)
                    .tangent_stiffness(&self.gather(de, d))
            }
        }))
    }

    /// Strain energy of the domain at state `d`.
    pub fn strain_energy(&self, model: &Model, d: &DVector<f64>) -> Result<f64> {
        self.check_len(d, "strain energy")?;
        Ok(self
            .elements
            .iter()
            .map(|de| {
                let de_vals = self.gather(de, d);
                if model.is_linear() {
                    let v = nalgebra::Vector6::from_column_slice(&de_vals);
                    0.5 * v.dot(&(model.element_tensors(de.element).stiffness * v))
                } else {
                    model.element_kernel(de.element).strain_energy(&de_vals)
                }
            })
            .sum())
    }

    /// Directional derivative of the tangent stiffness at the origin,
    /// `d/de K_t(e v)|_0 = 2 K2·v`, assembled from element tensors.
    pub fn tangent_derivative(&self, model: &Model, v: &DVector<f64>) -> Result<CscMatrix<f64>> {
        self.check_len(v, "tangent derivative")?;
        Ok(self.assemble_matrix(|de| {
            let ve = self.gather(de, v);
            let m = model.element_tensors(de.element).k2.contract_last(&ve);
            Matrix6::from_fn(|i, j| 2.0 * m[(i, j)])
        }))
    }

    /// Central-difference approximation of [`Domain::tangent_derivative`]
    /// with step `h`, using only tangent stiffness evaluations.
    pub fn tangent_derivative_fd(&self, model: &Model, v: &DVector<f64>, h: f64) -> Result<CscMatrix<f64>> {
        self.check_len(v, "tangent derivative")?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {h}")));
        }
        let kp = self.tangent_stiffness(model, &(v * h))?;
        let km = self.tangent_stiffness(model, &(v * -h))?;
        let c = 0.5 / h;
        Ok(csc_combination(&[(c, &kp), (-c, &km)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{BeamGeometry, Material, Rayleigh, Section};
    use crate::linalg::{asymmetry, generalized_eigen_dense, spmv, to_dense};

    fn steel() -> Material {
        Material::new(210e9, 7800.0, 0.33).unwrap()
    }

    fn beam(elements: usize, rise: f64) -> Model {
        Model::clamped_beam(
            &BeamGeometry {
                length: 0.1,
                width: 5e-3,
                thickness: 0.5e-3,
                elements,
                rise,
            },
            steel(),
            Rayleigh {
                alpha: 24.85,
                beta: 3.15e-6,
            },
        )
        .unwrap()
    }

    fn state(n: usize, seed: u64, scale: f64) -> DVector<f64> {
        let mut s = seed | 1;
        DVector::from_fn(n, |i, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let r = (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            // rotations scaled by a typical element length
            if i % 3 == 2 { r * scale / 2.5e-3 } else { r * scale }
        })
    }

    #[test]
    fn clamped_free_bar_axial_stiffness() {
        let sec = Section::new(0.01, 0.002).unwrap();
        let mat = steel();
        let m = Model::new(vec![(0.0, 0.0), (0.3, 0.0)], vec![[0, 1]], sec, mat, [0, 1, 2], Rayleigh::default())
            .unwrap();
        let ops = assemble_global(&m);
        let k = to_dense(&ops.stiffness);
        let ea = mat.youngs_modulus * sec.area();
        assert!((k[(0, 0)] - ea / 0.3).abs() < 1e-9 * ea);
        assert!(ops.stiffness_definite);
    }

    #[test]
    fn operators_symmetric_and_damping_is_rayleigh() {
        let m = beam(12, 5e-3);
        let ops = assemble_global(&m);
        assert_eq!(asymmetry(&ops.stiffness), 0.0);
        assert_eq!(asymmetry(&ops.mass), 0.0);
        let d = to_dense(&ops.damping);
        let expect = to_dense(&ops.mass) * 24.85 + to_dense(&ops.stiffness) * 3.15e-6;
        assert!((d - &expect).amax() <= 1e-12 * expect.amax());
    }

    #[test]
    fn unconstrained_model_reports_indefinite_stiffness() {
        let sec = Section::new(0.01, 0.002).unwrap();
        let m = Model::new(vec![(0.0, 0.0), (0.3, 0.0)], vec![[0, 1]], sec, steel(), [], Rayleigh::default())
            .unwrap();
        assert!(!assemble_global(&m).stiffness_definite);
    }

    #[test]
    fn flat_beam_frequencies() {
        let m = beam(40, 0.0);
        let ops = assemble_global(&m);
        let (vals, _) = generalized_eigen_dense(&to_dense(&ops.stiffness), &to_dense(&ops.mass)).unwrap();
        let freqs: Vec<f64> = vals.iter().take(3).map(|l| l.sqrt() / (2.0 * std::f64::consts::PI)).collect();
        for (f, reference) in freqs.iter().zip([269.5, 742.8, 1456.8]) {
            assert!((f - reference).abs() / reference < 0.03, "{f} vs {reference}");
        }
    }

    #[test]
    fn zero_state_force_and_tangent() {
        let m = beam(8, 5e-3);
        let dom = m.full_domain();
        let z = DVector::zeros(dom.n);
        assert_eq!(dom.internal_force(&m, &z).unwrap().amax(), 0.0);
        let kt = to_dense(&dom.tangent_stiffness(&m, &z).unwrap());
        let k = to_dense(&dom.stiffness(&m));
        assert!((kt - &k).amax() <= 1e-12 * k.amax());
    }

    #[test]
    fn tangent_is_force_jacobian_and_symmetric() {
        let m = beam(10, 5e-3);
        let dom = m.full_domain();
        for seed in 1..6 {
            let d = state(dom.n, seed, 2e-4);
            let v = state(dom.n, seed + 100, 1.0);
            let kt = dom.tangent_stiffness(&m, &d).unwrap();
            assert!(asymmetry(&kt) <= 1e-12 * to_dense(&kt).amax());
            let h = 1e-8;
            let fd = (dom.internal_force(&m, &(&d + &v * h)).unwrap() - dom.internal_force(&m, &(&d - &v * h)).unwrap())
                / (2.0 * h);
            let kv = spmv(&kt, &v);
            assert!((fd - &kv).norm() <= 1e-6 * kv.norm());
        }
    }

    #[test]
    fn exact_and_fd_tangent_derivative_agree() {
        let m = beam(10, 5e-3);
        let dom = m.full_domain();
        let v = state(dom.n, 7, 1e-3);
        let exact = to_dense(&dom.tangent_derivative(&m, &v).unwrap());
        let h = 1e-7 * 0.5e-3 / v.amax();
        let fd = to_dense(&dom.tangent_derivative_fd(&m, &v, h).unwrap());
        let err = (&exact - &fd).norm() / exact.norm();
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn quadratic_leading_order_of_nonlinear_force() {
        let m = beam(10, 0.0);
        let dom = m.full_domain();
        let k = dom.stiffness(&m);
        let d = state(dom.n, 3, 1e-3);
        let r = |e: f64| {
            let de = &d * e;
            (dom.internal_force(&m, &de).unwrap() - spmv(&k, &de)).norm()
        };
        let slope = (r(1e-2) / r(1e-3)).log10();
        assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn linearized_model_has_linear_force() {
        let m = beam(6, 5e-3).linearized();
        let dom = m.full_domain();
        let d = state(dom.n, 11, 1e-3);
        let f = dom.internal_force(&m, &d).unwrap();
        let kd = spmv(&dom.stiffness(&m), &d);
        assert!((f - &kd).amax() <= 1e-12 * kd.amax());
        assert_eq!(dom.tangent_derivative(&m, &d).unwrap().values().iter().fold(0.0f64, |a, v| a.max(v.abs())), 0.0);
    }
}
