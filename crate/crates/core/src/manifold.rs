//! Quadratic substructure manifold `d = L ξ + Q:(ξ⊗ξ)` with `ξ = [η; χ]`.
//!
//! The high-frequency fixed-interface content of the internal DoFs is
//! statically condensed: to second order it is the solution of
//! `K_uu u = f*` projected off the retained modes, where `f*` collects the
//! quadratic elastic forces of the linear displacement field. The interface
//! DoFs follow `Ψ χ` exactly, so interface rows of `Q` vanish.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::ReductionBasis;
use crate::fe::Model;
use crate::linalg::{spmm, spmv, to_dense, SparseCholesky};
use crate::partition::{Block, Substructure};
use crate::tensor::Tensor3;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"NLCBMAN1";

/// How the directional derivatives of the tangent stiffness are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RhsMethod {
    /// Contraction of the element quadratic tensors.
    Exact,
    /// Central difference of tangent stiffnesses; `step` is the max-norm of
    /// the perturbation displacement.
    FiniteDifference { step: f64 },
}

/// Default finite-difference perturbation as a fraction of the beam
/// thickness. The tangent stiffness is quadratic in the displacement, so the
/// central difference carries no truncation error and a large step only
/// reduces cancellation.
pub const FD_STEP_PER_THICKNESS: f64 = 1e-2;

impl RhsMethod {
    pub fn finite_difference(thickness: f64) -> Self {
        Self::FiniteDifference {
            step: FD_STEP_PER_THICKNESS * thickness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldOptions {
    pub rhs: RhsMethod,
    /// Bound on the relative residual of the linear part.
    pub residual_tolerance: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self {
            rhs: RhsMethod::Exact,
            residual_tolerance: 1e-8,
        }
    }
}

/// Which groups of quadratic coefficients to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadraticBlocks {
    pub modal: bool,
    pub cross: bool,
    pub interface: bool,
}

impl QuadraticBlocks {
    pub const ALL: Self = Self {
        modal: true,
        cross: true,
        interface: true,
    };
    pub const NONE: Self = Self {
        modal: false,
        cross: false,
        interface: false,
    };
}

/// Number of unordered pairs `(a, b)`, `a ≤ b`, over `m` coordinates.
pub fn pair_count(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of the pair `(a, b)` (in either order) in row-major packed
/// upper-triangular order.
pub fn pair_index(m: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    // rows before `a` hold m + (m-1) + ... + (m-a+1) pairs
    a * m - a * a.saturating_sub(1) / 2 + (b - a)
}

pub fn pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    /// `n × m`, rows in substructure order (internal then interface).
    pub linear: DMatrix<f64>,
    /// `n × m(m+1)/2`; column `pair_index(a, b)` holds `Q(:, a, b) = Q(:, b, a)`.
    pub quadratic: DMatrix<f64>,
    pub n_internal: usize,
    pub n_phi: usize,
    pub n_chi: usize,
}

impl Manifold {
    pub fn n(&self) -> usize {
        self.linear.nrows()
    }

    pub fn m(&self) -> usize {
        self.n_phi + self.n_chi
    }

    pub fn quadratic_entry(&self, i: usize, a: usize, b: usize) -> f64 {
        self.quadratic[(i, pair_index(self.m(), a, b))]
    }

    /// `Q:(ξ⊗ξ)`.
    pub fn quadratic_term(&self, xi: &DVector<f64>) -> DVector<f64> {
        let m = self.m();
        let mut w = DVector::zeros(pair_count(m));
        for (p, (a, b)) in pairs(m).into_iter().enumerate() {
            w[p] = if a == b { xi[a] * xi[a] } else { 2.0 * xi[a] * xi[b] };
        }
        &self.quadratic * w
    }

    pub fn displacement(&self, xi: &DVector<f64>) -> DVector<f64> {
        &self.linear * xi + self.quadratic_term(xi)
    }

    /// `∂d/∂ξ = L + 2 Q·ξ`.
    pub fn tangent(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m();
        let mut t = self.linear.clone();
        for a in 0..m {
            for b in 0..m {
                let c = 2.0 * xi[b];
                if c != 0.0 {
                    let col = self.quadratic.column(pair_index(m, a, b));
                    t.column_mut(a).axpy(c, &col, 1.0);
                }
            }
        }
        t
    }

    /// Dense `n × m × m` tensor.
    pub fn quadratic_tensor(&self) -> Tensor3 {
        let (n, m) = (self.n(), self.m());
        let mut t = Tensor3::zeros(n, m, m);
        for a in 0..m {
            for b in 0..m {
                let col = self.quadratic.column(pair_index(m, a, b));
                for i in 0..n {
                    t.set(i, a, b, col[i]);
                }
            }
        }
        t
    }

    /// Copy with the selected groups of quadratic coefficients zeroed.
    pub fn with_blocks(&self, keep: QuadraticBlocks) -> Self {
        let mut out = self.clone();
        let m = self.m();
        for (p, (a, b)) in pairs(m).into_iter().enumerate() {
            let (ia, ib) = (a < self.n_phi, b < self.n_phi);
            let kept = match (ia, ib) {
                (true, true) => keep.modal,
                (false, false) => keep.interface,
                _ => keep.cross,
            };
            if !kept {
                out.quadratic.column_mut(p).fill(0.0);
            }
        }
        out
    }

    /// Writes a little-endian dump: magic, `n m n_phi n_chi` as u64, the
    /// linear operator column-major, then `Q` as a dense `n × m × m` array
    /// with the row index fastest.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.n(), self.m(), self.n_phi, self.n_chi] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in self.linear.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        let m = self.m();
        for b in 0..m {
            for a in 0..m {
                for v in self.quadratic.column(pair_index(m, a, b)).iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`Manifold::write_binary`]. The header does not
    /// record the internal/interface row split, so the caller supplies it.
    pub fn read_binary(mut r: impl Read, n_internal: usize) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a manifold dump".into()));
        }
        let mut word = [0u8; 8];
        let mut dims = [0usize; 4];
        for d in &mut dims {
            r.read_exact(&mut word)?;
            *d = u64::from_le_bytes(word) as usize;
        }
        let [n, m, n_phi, n_chi] = dims;
        if n_phi + n_chi != m || n_internal > n {
            return Err(Error::Format(format!("inconsistent header {dims:?}")));
        }
        let mut read_f64 = || -> Result<f64> {
            r.read_exact(&mut word)?;
            Ok(f64::from_le_bytes(word))
        };
        let mut lin = Vec::with_capacity(n * m);
        for _ in 0..n * m {
            lin.push(read_f64()?);
        }
        let mut quadratic = DMatrix::zeros(n, pair_count(m));
        for b in 0..m {
            for a in 0..m {
                for i in 0..n {
                    let v = read_f64()?;
                    if a <= b {
                        quadratic[(i, pair_index(m, a, b))] = v;
                    }
                }
            }
        }
        Ok(Self {
            linear: DMatrix::from_vec(n, m, lin),
            quadratic,
            n_internal,
            n_phi,
            n_chi,
        })
    }
}

/// Linear manifold operator `[Φ, Φ̂B̂; 0, Ψ]` and `Φ̂B̂ = (I - Φ Φᵀ M_uu) S Ψ`.
pub fn linear_part(
    sub: &Substructure,
    basis: &ReductionBasis,
    tolerance: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n_u = sub.n_internal();
    let phi = &basis.phi;
    let psi = &basis.psi;
    if phi.nrows() != n_u || psi.nrows() != sub.n_interface() || basis.static_modes.shape() != (n_u, sub.n_interface()) {
        return Err(Error::DimensionMismatch {
            context: "manifold linear part",
            expected: n_u,
            found: phi.nrows(),
        });
    }
    let m_uu = sub.block(&sub.mass, Block::InternalInternal);
    let k_uu = sub.block(&sub.stiffness, Block::InternalInternal);
    let k_uq = sub.block(&sub.stiffness, Block::InternalInterface);
    let s_psi = &basis.static_modes * psi;
    let phihat_b = deflate(&s_psi, phi, &m_uu);

    // (I - M Φ Φᵀ)(K_uu Φ̂B̂ + K_uq Ψ) must vanish
    if psi.ncols() > 0 {
        let kuq_psi = to_dense(&k_uq) * psi;
        let r = spmm(&k_uu, &phihat_b) + &kuq_psi;
        let r = &r - spmm(&m_uu, phi) * (phi.transpose() * &r);
        let rel = r.amax() / kuq_psi.amax().max(f64::MIN_POSITIVE);
        if rel > tolerance {
            return Err(Error::ResidualCheck {
                context: "manifold linear part",
                residual: rel,
                tolerance,
            });
        }
    }

    let (n_phi, n_chi) = (phi.ncols(), psi.ncols());
    let mut l = DMatrix::zeros(sub.n(), n_phi + n_chi);
    l.view_mut((0, 0), (n_u, n_phi)).copy_from(phi);
    l.view_mut((0, n_phi), (n_u, n_chi)).copy_from(&phihat_b);
    l.view_mut((n_u, n_phi), (sub.n_interface(), n_chi)).copy_from(psi);
    Ok((l, phihat_b))
}

/// `X - Φ (Φᵀ M X)`.
fn deflate(x: &DMatrix<f64>, phi: &DMatrix<f64>, m_uu: &CscMatrix<f64>) -> DMatrix<f64> {
    let c = phi.transpose() * spmm(m_uu, x);
    x - phi * c
}

/// Directional derivative of the substructure tangent stiffness at the
/// origin along `v`.
fn stiffness_derivative(model: &Model, sub: &Substructure, v: &DVector<f64>, method: RhsMethod) -> Result<CscMatrix<f64>> {
    match method {
        RhsMethod::Exact => sub.domain.tangent_derivative(model, v),
        RhsMethod::FiniteDifference { step } => {
            let vmax = v.amax();
            if vmax == 0.0 {
                return Ok(CscMatrix::zeros(v.len(), v.len()));
            }
            sub.domain.tangent_derivative_fd(model, v, step / vmax)
        }
    }
}

/// Right-hand sides `f*_ab = -½(2-δ_ab) [dK(ℓ_a) ℓ_b]_u` for all pairs
/// `a ≤ b`, where `ℓ_a` are the columns of the linear operator.
pub fn quadratic_rhs(
    model: &Model,
    sub: &Substructure,
    linear: &DMatrix<f64>,
    method: RhsMethod,
) -> Result<DMatrix<f64>> {
    let m = linear.ncols();
    let n_u = sub.n_internal();
    let mut f = DMatrix::zeros(n_u, pair_count(m));
    for a in 0..m {
        let la = linear.column(a).into_owned();
        let dk = stiffness_derivative(model, sub, &la, method)?;
        for b in a..m {
            let lb = linear.column(b).into_owned();
            let v = spmv(&dk, &lb);
            let factor = if a == b { -0.5 } else { -1.0 };
            let p = pair_index(m, a, b);
            for i in 0..n_u {
                f[(i, p)] = factor * v[i];
            }
        }
    }
    Ok(f)
}

/// Deflated solves `(I - Φ Φᵀ M_uu) K_uu⁻¹ f*`, one per column.
pub fn quadratic_part(
    k_uu: &SparseCholesky,
    phi: &DMatrix<f64>,
    m_uu: &CscMatrix<f64>,
    rhs: &DMatrix<f64>,
) -> DMatrix<f64> {
    deflate(&k_uu.solve_matrix(rhs), phi, m_uu)
}

/// Full manifold of one substructure.
pub fn build_manifold(
    model: &Model,
    sub: &Substructure,
    basis: &ReductionBasis,
    k_uu: &SparseCholesky,
    opts: &ManifoldOptions,
) -> Result<Manifold> {
    let (linear, _) = linear_part(sub, basis, opts.residual_tolerance)?;
    let rhs = quadratic_rhs(model, sub, &linear, opts.rhs)?;
    let m_uu = sub.block(&sub.mass, Block::InternalInternal);
    let coeffs = quadratic_part(k_uu, &basis.phi, &m_uu, &rhs);
    let m = linear.ncols();
    let n_u = sub.n_internal();
    let mut quadratic = DMatrix::zeros(sub.n(), pair_count(m));
    for (p, (a, b)) in pairs(m).into_iter().enumerate() {
        // off-diagonal coefficients are shared between Q(:,a,b) and Q(:,b,a)
        let scale = if a == b { 1.0 } else { 0.5 };
        quadratic
            .view_mut((0, p), (n_u, 1))
            .copy_from(&(coeffs.column(p) * scale));
    }
    Ok(Manifold {
        linear,
        quadratic,
        n_internal: n_u,
        n_phi: basis.phi.ncols(),
        n_chi: basis.psi.ncols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{interface_bases, reduction_basis, EigenOptions, InterfaceReduction};
    use crate::fe::{BeamGeometry, Material, NodalDof, Rayleigh};
    use crate::linalg::principal_angles;
    use crate::partition::partition_model;

    fn setup(elements: usize, rise: f64) -> (Model, crate::partition::Partition, Vec<DMatrix<f64>>) {
        let model = Model::clamped_beam(
            &BeamGeometry {
                length: 0.1,
                width: 5e-3,
                thickness: 0.5e-3,
                elements,
                rise,
            },
            Material::new(210e9, 7800.0, 0.33).unwrap(),
            Rayleigh::default(),
        )
        .unwrap();
        let cut = model.node_near(0.06);
        let p = partition_model(&model, &[vec![cut]]).unwrap();
        let bases = interface_bases(&model, &p, InterfaceReduction::VirtualNode).unwrap();
        (model, p, bases)
    }

    #[test]
    fn pair_indexing_is_dense_and_ordered() {
        let m = 5;
        for (p, (a, b)) in pairs(m).into_iter().enumerate() {
            assert_eq!(pair_index(m, a, b), p);
            assert_eq!(pair_index(m, b, a), p);
        }
        assert_eq!(pairs(m).len(), pair_count(m));
    }

    #[test]
    fn linear_part_properties() {
        let (model, p, bases) = setup(30, 5e-3);
        for sub in &p.substructures {
            let (basis, chol) = reduction_basis(sub, 2, &bases, &EigenOptions::default()).unwrap();
            let (l, phb) = linear_part(sub, &basis, 1e-8).unwrap();
            let m_uu = sub.block(&sub.mass, Block::InternalInternal);
            let orth = basis.phi.transpose() * spmm(&m_uu, &phb);
            assert!(orth.amax() < 1e-10 * phb.amax());
            let cb = {
                let mut v = basis.phi.clone().resize_horizontally(2 + 3, 0.0);
                v.view_mut((0, 2), (sub.n_internal(), 3)).copy_from(&(&basis.static_modes * &basis.psi));
                v
            };
            let lin_u = l.rows(0, sub.n_internal()).into_owned();
            assert!(principal_angles(&lin_u, &cb).iter().all(|&t| t < 1e-8));
            let _ = chol;
            let _ = &model;
        }
    }

    #[test]
    fn manifold_structure_and_axial_dominance() {
        let (model, p, bases) = setup(40, 0.0);
        let sub = &p.substructures[0];
        let (basis, chol) = reduction_basis(sub, 1, &bases, &EigenOptions::default()).unwrap();
        let man = build_manifold(&model, sub, &basis, &chol, &ManifoldOptions::default()).unwrap();
        assert_eq!(man.m(), 4);
        // interface rows: linear part is [0, Ψ], quadratic part zero
        let n_u = sub.n_internal();
        assert!(man.quadratic.rows(n_u, 3).amax() == 0.0);
        assert_eq!(man.linear.view((n_u, 0), (3, 1)).amax(), 0.0);
        // deflation
        let m_uu = sub.block(&sub.mass, Block::InternalInternal);
        let q_u = man.quadratic.rows(0, n_u).into_owned();
        let m_phi = spmm(&m_uu, &basis.phi);
        assert!((m_phi.transpose() * &q_u).norm() < 1e-10 * m_phi.norm() * q_u.norm());
        // the (η1, η1) coefficient of a flat beam is in-plane
        let col = man.quadratic.column(pair_index(4, 0, 0));
        let axial: f64 = sub
            .internal_dofs()
            .iter()
            .enumerate()
            .filter(|(_, &g)| (0..model.n_nodes()).any(|n| model.dof(n, NodalDof::U) == Some(g)))
            .map(|(k, _)| col[k] * col[k])
            .sum();
        assert!(axial.sqrt() > 0.9 * col.norm());
    }

    #[test]
    fn linear_model_has_no_quadratic_part() {
        let (model, p, bases) = setup(20, 5e-3);
        let lin = model.linearized();
        let sub = &p.substructures[1];
        let (basis, chol) = reduction_basis(sub, 2, &bases, &EigenOptions::default()).unwrap();
        let man = build_manifold(&lin, sub, &basis, &chol, &ManifoldOptions::default()).unwrap();
        assert_eq!(man.quadratic.amax(), 0.0);
    }

    #[test]
    fn binary_dump_round_trip() {
        let (model, p, bases) = setup(12, 5e-3);
        let sub = &p.substructures[0];
        let (basis, chol) = reduction_basis(sub, 2, &bases, &EigenOptions::default()).unwrap();
        let man = build_manifold(&model, sub, &basis, &chol, &ManifoldOptions::default()).unwrap();
        let mut buf = Vec::new();
        man.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 + 8 * (man.n() * man.m() * (1 + man.m())));
        let back = Manifold::read_binary(buf.as_slice(), man.n_internal).unwrap();
        assert_eq!(back, man);
        assert!(Manifold::read_binary(&b"garbage!"[..], 0).is_err());
    }

    #[test]
    fn tangent_matches_finite_difference_of_displacement() {
        let (model, p, bases) = setup(12, 5e-3);
        let sub = &p.substructures[1];
        let (basis, chol) = reduction_basis(sub, 2, &bases, &EigenOptions::default()).unwrap();
        let man = build_manifold(&model, sub, &basis, &chol, &ManifoldOptions::default()).unwrap();
        let xi = DVector::from_fn(man.m(), |i, _| 1e-3 * (i as f64 + 1.0).sin());
        let t = man.tangent(&xi);
        for a in 0..man.m() {
            let mut e = DVector::zeros(man.m());
            e[a] = 1e-6;
            let fd = (man.displacement(&(&xi + &e)) - man.displacement(&(&xi - &e))) / 2e-6;
            assert!((fd - t.column(a)).amax() <= 1e-8 * t.column(a).amax());
        }
    }
}
