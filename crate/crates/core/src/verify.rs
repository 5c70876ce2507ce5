//! Brute-force reference computations for testing. Everything here is
//! deliberately slow and avoids the tensor kernels it is meant to check.

use nalgebra::{DMatrix, DVector};

use crate::fe::{Model, ELEMENT_DOFS};
use crate::linalg::{spmm, to_dense};
use crate::partition::{Block, Localization, Substructure};
use crate::tensor::{Tensor3, Tensor4};
use crate::{Error, Result};

/// Largest model the dense global tensor oracle accepts.
pub const ORACLE_MAX_DOFS: usize = 60;

/// Dense global nonlinear stiffness tensors over the model's free DoFs, with
/// `f_el(d) = K d + K2:(d⊗d) + K3:(d⊗d⊗d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTensors {
    pub k2: Tensor3,
    pub k3: Tensor4,
}

impl GlobalTensors {
    /// Restricts to the DoFs of a localization (local ordering).
    pub fn restrict(&self, loc: &Localization) -> Self {
        let n = loc.n_local();
        let map = &loc.map;
        let mut k2 = Tensor3::cube(n);
        let mut k3 = Tensor4::cube(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    k2.set(i, j, k, self.k2.get(map[i], map[j], map[k]));
                    for l in 0..n {
                        k3.set(i, j, k, l, self.k3.get(map[i], map[j], map[k], map[l]));
                    }
                }
            }
        }
        Self { k2, k3 }
    }

    /// `K2:(d⊗d) + K3:(d⊗d⊗d)`.
    pub fn nonlinear_force(&self, d: &DVector<f64>) -> DVector<f64> {
        self.k2.contract2(d.as_slice(), d.as_slice()) + self.k3.contract3(d.as_slice(), d.as_slice(), d.as_slice())
    }
}

/// Assembles the global tensors by polarizing the quadrature element force.
/// For a polynomial force the even and odd parts separate exactly, so the
/// symmetric multilinear forms follow from a handful of force evaluations.
pub fn global_tensor_oracle(model: &Model) -> Result<GlobalTensors> {
    let n = model.n_free();
    if n > ORACLE_MAX_DOFS {
        return Err(Error::OracleLimit(format!(
            "{n} free DoFs exceeds the dense tensor cap of {ORACLE_MAX_DOFS}"
        )));
    }
    let mut k2 = Tensor3::cube(n);
    let mut k3 = Tensor4::cube(n);
    if model.is_linear() {
        return Ok(GlobalTensors { k2, k3 });
    }
    for e in 0..model.n_elements() {
        let kernel = model.element_kernel(e);
        let k = kernel.tangent_stiffness(&[0.0; ELEMENT_DOFS]);
        let len = kernel.length();
        let scale: [f64; ELEMENT_DOFS] = std::array::from_fn(|a| if a % 3 == 2 { 1.0 } else { len });
        let force = |d: &[f64; ELEMENT_DOFS]| kernel.internal_force(d);
        let even = |d: &[f64; ELEMENT_DOFS]| {
            let m: [f64; ELEMENT_DOFS] = d.map(|x| -x);
            (force(d) + force(&m)) * 0.5
        };
        let odd = |d: &[f64; ELEMENT_DOFS]| {
            let m: [f64; ELEMENT_DOFS] = d.map(|x| -x);
            (force(d) - force(&m)) * 0.5 - k * nalgebra::Vector6::from_column_slice(d)
        };
        let basis = |dirs: &[usize]| {
            let mut d = [0.0; ELEMENT_DOFS];
            for &a in dirs {
                d[a] += scale[a];
            }
            d
        };
        let free: Vec<Option<usize>> = model
            .element_global_dofs(e)
            .iter()
            .map(|&g| model.free_index(g))
            .collect();

        for a in 0..ELEMENT_DOFS {
            for b in a..ELEMENT_DOFS {
                let q = (even(&basis(&[a, b])) - even(&basis(&[a])) - even(&basis(&[b]))) / (2.0 * scale[a] * scale[b]);
                let (Some(ga), Some(gb)) = (free[a], free[b]) else { continue };
                for i in 0..ELEMENT_DOFS {
                    let Some(gi) = free[i] else { continue };
                    k2.add(gi, ga, gb, q[i]);
                    if a != b {
                        k2.add(gi, gb, ga, q[i]);
                    }
                }
            }
        }

        for a in 0..ELEMENT_DOFS {
            for b in a..ELEMENT_DOFS {
                for c in b..ELEMENT_DOFS {
                    let t = (odd(&basis(&[a, b, c])) - odd(&basis(&[a, b])) - odd(&basis(&[a, c])) - odd(&basis(&[b, c]))
                        + odd(&basis(&[a]))
                        + odd(&basis(&[b]))
                        + odd(&basis(&[c])))
                        / (6.0 * scale[a] * scale[b] * scale[c]);
                    let (Some(ga), Some(gb), Some(gc)) = (free[a], free[b], free[c]) else { continue };
                    let mut perms = vec![[ga, gb, gc], [ga, gc, gb], [gb, ga, gc], [gb, gc, ga], [gc, ga, gb], [gc, gb, ga]];
                    perms.sort_unstable();
                    perms.dedup();
                    for i in 0..ELEMENT_DOFS {
                        let Some(gi) = free[i] else { continue };
                        for p in &perms {
                            k3.add(gi, p[0], p[1], p[2], t[i]);
                        }
                    }
                }
            }
        }
    }
    Ok(GlobalTensors { k2, k3 })
}

/// Options for [`static_condensation_oracle`].
#[derive(Debug, Clone, Copy)]
pub struct CondensationOptions {
    /// Relative tolerance on the Newton update.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CondensationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-14,
            max_iterations: 50,
        }
    }
}

/// Internal displacement `u` of a substructure in nonlinear static
/// equilibrium with the interface held at `Ψχ` and the modal content
/// constrained to `Φᵀ M_uu u = η`:
///
/// `f_u(u, Ψχ) + M_uu Φ λ = 0`, solved by bordered Newton on `(u, λ)`
/// with the quadrature tangent stiffness.
pub fn static_condensation_oracle(
    model: &Model,
    sub: &Substructure,
    phi: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    eta: &DVector<f64>,
    chi: &DVector<f64>,
    opts: CondensationOptions,
) -> Result<DVector<f64>> {
    let nu = sub.n_internal();
    let np = phi.ncols();
    if phi.nrows() != nu || eta.len() != np {
        return Err(Error::DimensionMismatch {
            context: "condensation modal constraint",
            expected: nu,
            found: phi.nrows(),
        });
    }
    if psi.nrows() != sub.n_interface() || chi.len() != psi.ncols() {
        return Err(Error::DimensionMismatch {
            context: "condensation interface",
            expected: sub.n_interface(),
            found: psi.nrows(),
        });
    }
    let mphi = spmm(&sub.block(&sub.mass, Block::InternalInternal), phi);
    let q = psi * chi;
    let mut d = DVector::zeros(sub.n());
    d.rows_mut(nu, sub.n_interface()).copy_from(&q);
    let mut lambda = DVector::zeros(np);
    let mut last = f64::INFINITY;

    for _ in 0..opts.max_iterations {
        let f = sub.domain.internal_force(model, &d)?;
        let kt = to_dense(&sub.domain.tangent_stiffness(model, &d)?);
        let u = d.rows(0, nu).into_owned();
        let mut a = DMatrix::zeros(nu + np, nu + np);
        a.view_mut((0, 0), (nu, nu)).copy_from(&kt.view((0, 0), (nu, nu)));
        a.view_mut((0, nu), (nu, np)).copy_from(&mphi);
        a.view_mut((nu, 0), (np, nu)).copy_from(&mphi.transpose());
        let mut rhs = DVector::zeros(nu + np);
        rhs.rows_mut(0, nu).copy_from(&(-(f.rows(0, nu) + &mphi * &lambda)));
        rhs.rows_mut(nu, np).copy_from(&(eta - mphi.transpose() * &u));
        let step = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Factorization("singular bordered condensation matrix".into()))?;
        let du = step.rows(0, nu);
        let mut u_new = d.rows_mut(0, nu);
        u_new += du;
        lambda += step.rows(nu, np);
        let size = d.rows(0, nu).amax();
        last = du.amax() / size;
        if du.amax() <= opts.tolerance * size || size == 0.0 {
            return Ok(d.rows(0, nu).into_owned());
        }
    }
    Err(Error::ResidualCheck {
        context: "static condensation",
        residual: last,
        tolerance: opts.tolerance,
    })
}

/// `n` logarithmically spaced values from `a` to `b`.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|k| (la + (lb - la) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Least-squares slope of `log g(ε)` against `log ε`.
pub fn log_log_slope(eps: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Smallest log-log slope of `‖g(ε v)‖` over the given directions.
pub fn scaling_probe(g: &dyn Fn(&DVector<f64>) -> f64, directions: &[DVector<f64>], eps: &[f64]) -> f64 {
    directions
        .iter()
        .map(|v| {
            let vals: Vec<f64> = eps.iter().map(|&e| g(&(v * e))).collect();
            log_log_slope(eps, &vals)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{BeamGeometry, Material, Rayleigh};

    fn model(elements: usize, rise: f64) -> Model {
        let geom = BeamGeometry {
            length: 0.2,
            width: 0.01,
            thickness: 1e-3,
            elements,
            rise,
        };
        Model::clamped_beam(&geom, Material::new(70e9, 2700.0, 0.33).unwrap(), Rayleigh::default()).unwrap()
    }

    #[test]
    fn single_element_oracle_matches_element_tensors() {
        // one free node is too few for a clamped beam, so free all DoFs
        let m = model(1, 0.0);
        let free = Model::new(
            m.nodes().to_vec(),
            m.connectivity().to_vec(),
            *m.section(),
            *m.material(),
            Vec::<usize>::new(),
            Rayleigh::default(),
        )
        .unwrap();
        let g = global_tensor_oracle(&free).unwrap();
        let t = free.element_tensors(0);
        let scale2 = t.k2.amax();
        let scale3 = t.k3.amax();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    assert!((g.k2.get(i, j, k) - t.k2.get(i, j, k)).abs() <= 1e-9 * scale2);
                    for l in 0..6 {
                        assert!((g.k3.get(i, j, k, l) - t.k3.get(i, j, k, l)).abs() <= 1e-9 * scale3);
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_force_matches_quadrature_force() {
        use rand::{Rng, SeedableRng};
        let m = model(6, 2e-3);
        let g = global_tensor_oracle(&m).unwrap();
        let domain = m.full_domain();
        let k = to_dense(&domain.stiffness(&m));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let d = DVector::from_fn(m.n_free(), |_, _| rng.random_range(-1.0..1.0) * 1e-3);
            let f = domain.internal_force(&m, &d).unwrap();
            let f_oracle = &k * &d + g.nonlinear_force(&d);
            assert!((&f - &f_oracle).amax() <= 1e-9 * f.amax());
        }
    }

    #[test]
    fn oracle_cap() {
        assert!(matches!(global_tensor_oracle(&model(40, 0.0)), Err(Error::OracleLimit(_))));
    }

    #[test]
    fn slopes_of_monomials() {
        let eps = log_space(1e-4, 1e-2, 9);
        let dirs = [DVector::from_vec(vec![1.0, -2.0]), DVector::from_vec(vec![0.3, 0.1])];
        let id = scaling_probe(&|v| v.norm(), &dirs, &eps);
        let cubic = scaling_probe(&|v| v.norm().powi(3), &dirs, &eps);
        assert!((id - 1.0).abs() < 1e-12);
        assert!((cubic - 3.0).abs() < 1e-12);
    }
}
