//! Fixed-interface modes, static modes and interface reduction bases.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use crate::fe::{Model, NodalDof, DOFS_PER_NODE};
use crate::linalg::{generalized_eigen_dense, orthonormal_basis, spmm, to_dense, SparseCholesky};
use crate::partition::{Block, Interface, Partition, Substructure};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Problems up to this size use the dense solver.
    pub dense_limit: usize,
    /// Relative residual required from the iterative solver.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_limit: 2000,
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterfaceReduction {
    /// Rigid translations and rotation of the interface patch.
    VirtualNode,
    /// Keep every interface DoF.
    Identity,
}

#[derive(Debug, Clone)]
pub struct ReductionBasis {
    /// Mass-normalized fixed-interface modes, `n_u × n_φ`.
    pub phi: DMatrix<f64>,
    /// Angular frequencies, ascending.
    pub omega: DVector<f64>,
    /// Static modes `-K_uu⁻¹ K_uq`, `n_u × n_q`.
    pub static_modes: DMatrix<f64>,
    /// Interface basis, `n_q × n_χ`.
    pub psi: DMatrix<f64>,
}

/// Lowest `count` mass-normalized eigenpairs of `K x = ω² M x`. Each vector
/// is signed so that its largest-magnitude entry is positive.
pub fn modes(
    k: &CscMatrix<f64>,
    m: &CscMatrix<f64>,
    count: usize,
    opts: &EigenOptions,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = k.nrows();
    if count == 0 || count > n {
        return Err(Error::InvalidConfig(format!(
            "requested {count} modes from a problem of size {n}"
        )));
    }
    let (vals, mut vecs) = if n <= opts.dense_limit {
        let (vals, vecs) = generalized_eigen_dense(&to_dense(k), &to_dense(m))?;
        (vals.rows(0, count).into_owned(), vecs.columns(0, count).into_owned())
    } else {
        subspace_iteration(k, m, count, opts)?
    };
    fix_signs(&mut vecs);
    if let Some(bad) = vals.iter().find(|&&v| v <= 0.0) {
        return Err(Error::InvalidModel(format!(
            "non-positive eigenvalue {bad}: stiffness is not definite"
        )));
    }
    Ok((vecs, vals.map(f64::sqrt)))
}

pub fn fixed_interface_modes(
    k_uu: &CscMatrix<f64>,
    m_uu: &CscMatrix<f64>,
    n_phi: usize,
    opts: &EigenOptions,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    modes(k_uu, m_uu, n_phi, opts)
}

/// Makes the largest-magnitude entry of every column positive. Entries within
/// a relative `1e-8` of the maximum count as tied and the first one wins, so
/// antisymmetric modes get a reproducible sign.
fn fix_signs(vecs: &mut DMatrix<f64>) {
    for mut c in vecs.column_iter_mut() {
        let top = c.amax();
        if let Some(i) = c.iter().position(|v| v.abs() >= top * (1.0 - 1e-8)) {
            if c[i] < 0.0 {
                c.neg_mut();
            }
        }
    }
}

/// Block inverse iteration with Rayleigh-Ritz acceleration, for problems
/// too large for the dense solver.
fn subspace_iteration(
    k: &CscMatrix<f64>,
    m: &CscMatrix<f64>,
    count: usize,
    opts: &EigenOptions,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    let p = (2 * count).min(count + 8).min(n);
    let chol = SparseCholesky::factor(k)?;
    let mut x = DMatrix::from_fn(n, p, |i, j| {
        // deterministic, well-mixed start block
        let t = (i * (j + 1)) as f64 * 0.618_033_988_749_895 + j as f64 * 0.1;
        (t.fract() - 0.5) + if i % (j + 2) == 0 { 1.0 } else { 0.0 }
    });
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let y = chol.solve_matrix(&spmm(m, &x));
        let kr = y.transpose() * spmm(k, &y);
        let mr = y.transpose() * spmm(m, &y);
        let kr = (&kr + kr.transpose()) * 0.5;
        let mr = (&mr + mr.transpose()) * 0.5;
        let (vals, z) = generalized_eigen_dense(&kr, &mr)?;
        x = &y * z;
        let kx = spmm(k, &x.columns(0, count).into_owned());
        let mx = spmm(m, &x.columns(0, count).into_owned());
        residual = (0..count)
            .map(|j| (kx.column(j) - mx.column(j) * vals[j]).norm() / kx.column(j).norm())
            .fold(0.0, f64::max);
        if residual < opts.tolerance {
            return Ok((vals.rows(0, count).into_owned(), x.columns(0, count).into_owned()));
        }
    }
    Err(Error::EigenSolver {
        iterations: opts.max_iterations,
        residual,
    })
}

/// `S = -K_uu⁻¹ K_uq` with an existing factorization of `K_uu`.
pub fn static_modes(k_uu: &SparseCholesky, k_uq: &CscMatrix<f64>) -> Result<DMatrix<f64>> {
    if k_uq.nrows() != k_uu.dim() {
        return Err(Error::DimensionMismatch {
            context: "static modes",
            expected: k_uu.dim(),
            found: k_uq.nrows(),
        });
    }
    Ok(-k_uu.solve_matrix(&to_dense(k_uq)))
}

/// Rigid-body basis of an interface patch: translations along `x` and `z`
/// and a rotation about the patch centroid, orthonormalized. Columns that are
/// dependent on the free interface DoFs are dropped.
pub fn virtual_node_interface(model: &Model, interface: &Interface) -> Result<DMatrix<f64>> {
    if interface.nodes.is_empty() || interface.dofs.is_empty() {
        return Err(Error::InvalidInterface("empty interface".into()));
    }
    let nodes = model.nodes();
    let count = interface.nodes.len() as f64;
    let xc = interface.nodes.iter().map(|&n| nodes[n].0).sum::<f64>() / count;
    let zc = interface.nodes.iter().map(|&n| nodes[n].1).sum::<f64>() / count;
    let rows: Vec<(usize, NodalDof)> = interface
        .nodes
        .iter()
        .flat_map(|&n| {
            (0..DOFS_PER_NODE).filter_map(move |k| {
                model
                    .free_index(n * DOFS_PER_NODE + k)
                    .map(|_| (n, NodalDof::from_offset(k).expect("offset below 3")))
            })
        })
        .collect();
    let rigid = DMatrix::from_fn(rows.len(), 3, |r, c| {
        let (n, dof) = rows[r];
        let (x, z) = nodes[n];
        match (c, dof) {
            (0, NodalDof::U) | (1, NodalDof::W) => 1.0,
            (2, NodalDof::U) => z - zc,
            (2, NodalDof::W) => -(x - xc),
            (2, NodalDof::Theta) => 1.0,
            _ => 0.0,
        }
    });
    let psi = orthonormal_basis(&rigid, 1e-10);
    if psi.ncols() == 0 {
        return Err(Error::InvalidInterface("interface basis is empty".into()));
    }
    Ok(psi)
}

/// One basis per interface of the partition.
pub fn interface_bases(
    model: &Model,
    partition: &Partition,
    kind: InterfaceReduction,
) -> Result<Vec<DMatrix<f64>>> {
    partition
        .interfaces
        .iter()
        .map(|iface| match kind {
            InterfaceReduction::VirtualNode => virtual_node_interface(model, iface),
            InterfaceReduction::Identity => Ok(DMatrix::identity(iface.dofs.len(), iface.dofs.len())),
        })
        .collect()
}

/// Block-diagonal interface basis of a substructure, one block per touched
/// interface in local order.
pub fn substructure_psi(sub: &Substructure, bases: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols: usize = sub.interfaces.iter().map(|(k, _)| bases[*k].ncols()).sum();
    let mut psi = DMatrix::zeros(sub.n_interface(), cols);
    let mut c0 = 0;
    for (k, range) in &sub.interfaces {
        let b = &bases[*k];
        let r0 = range.start - sub.n_internal();
        psi.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
        c0 += b.ncols();
    }
    psi
}

/// Fixed-interface modes, static modes and interface basis of one
/// substructure, together with the reusable factorization of `K_uu`.
pub fn reduction_basis(
    sub: &Substructure,
    n_phi: usize,
    bases: &[DMatrix<f64>],
    opts: &EigenOptions,
) -> Result<(ReductionBasis, SparseCholesky)> {
    let k_uu = sub.block(&sub.stiffness, Block::InternalInternal);
    let m_uu = sub.block(&sub.mass, Block::InternalInternal);
    let k_uq = sub.block(&sub.stiffness, Block::InternalInterface);
    let chol = SparseCholesky::factor(&k_uu)?;
    let (phi, omega) = fixed_interface_modes(&k_uu, &m_uu, n_phi, opts)?;
    let static_modes = static_modes(&chol, &k_uq)?;
    let psi = substructure_psi(sub, bases);
    Ok((
        ReductionBasis {
            phi,
            omega,
            static_modes,
            psi,
        },
        chol,
    ))
}
