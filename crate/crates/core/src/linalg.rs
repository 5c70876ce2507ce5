//! Sparse and dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::{Error, Result};

/// Builds a CSC matrix from `(row, col, value)` triplets; duplicates are summed.
pub fn csc_from_triplets(
    nrows: usize,
    ncols: usize,
    triplets: impl IntoIterator<Item = (usize, usize, f64)>,
) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(nrows, ncols);
    for (i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CscMatrix::from(&coo)
}

pub fn spmv(a: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    assert_eq!(a.ncols(), x.len(), "spmv dimension mismatch");
    let mut y = DVector::zeros(a.nrows());
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

/// Sparse-times-dense product `A * X`.
pub fn spmm(a: &CscMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), x.nrows(), "spmm dimension mismatch");
    let mut y = DMatrix::zeros(a.nrows(), x.ncols());
    for (j, col) in a.col_iter().enumerate() {
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            for c in 0..x.ncols() {
                y[(i, c)] += v * x[(j, c)];
            }
        }
    }
    y
}

pub fn to_dense(a: &CscMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, &v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

/// Linear combination `sum_k c_k A_k` of matrices sharing the same shape.
pub fn csc_combination(terms: &[(f64, &CscMatrix<f64>)]) -> CscMatrix<f64> {
    let (nrows, ncols) = terms
        .first()
        .map(|(_, a)| (a.nrows(), a.ncols()))
        .unwrap_or((0, 0));
    csc_from_triplets(
        nrows,
        ncols,
        terms
            .iter()
            .flat_map(|(c, a)| a.triplet_iter().map(move |(i, j, &v)| (i, j, c * v))),
    )
}

/// Extracts `A[rows, cols]`.
pub fn submatrix(a: &CscMatrix<f64>, rows: &[usize], cols: &[usize]) -> CscMatrix<f64> {
    let mut row_pos = vec![usize::MAX; a.nrows()];
    for (k, &r) in rows.iter().enumerate() {
        row_pos[r] = k;
    }
    let mut trip = Vec::new();
    for (jc, &c) in cols.iter().enumerate() {
        let col = a.col(c);
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            let p = row_pos[i];
            if p != usize::MAX {
                trip.push((p, jc, v));
            }
        }
    }
    csc_from_triplets(rows.len(), cols.len(), trip)
}

/// Max-norm of `A - A^T`.
pub fn asymmetry(a: &CscMatrix<f64>) -> f64 {
    let d = to_dense(a);
    (&d - d.transpose()).amax()
}

/// Sparse Cholesky factorization (natural ordering; intended for banded
/// structural matrices).
pub struct SparseCholesky {
    factor: CscCholesky<f64>,
    n: usize,
}

impl SparseCholesky {
    pub fn factor(a: &CscMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                context: "cholesky",
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let factor = CscCholesky::factor(a)
            .map_err(|e| Error::Factorization(format!("sparse Cholesky: {e:?}")))?;
        Ok(Self {
            factor,
            n: a.nrows(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let x = self.factor.solve(b);
        DVector::from_column_slice(x.as_slice())
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        if b.ncols() == 0 {
            return DMatrix::zeros(self.n, 0);
        }
        self.factor.solve(b)
    }
}

/// Dense symmetric-definite generalized eigenproblem `K x = λ M x`.
///
/// Returns eigenvalues ascending and `M`-orthonormal eigenvectors.
pub fn generalized_eigen_dense(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    if k.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "generalized eigenproblem",
            expected: n,
            found: m.nrows(),
        });
    }
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // A = L^-1 K L^-T
    let y = l
        .solve_lower_triangular(k)
        .ok_or_else(|| Error::Factorization("singular mass factor".into()))?;
    let a = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Factorization("singular mass factor".into()))?;
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut zs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        zs.set_column(c, &eig.eigenvectors.column(i));
    }
    let vectors = l
        .transpose()
        .solve_upper_triangular(&zs)
        .ok_or_else(|| Error::Factorization("singular mass factor".into()))?;
    Ok((values, vectors))
}

/// Orthonormal basis of the column space (Householder QR, rank-revealing by
/// diagonal threshold).
pub fn orthonormal_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    // Column scaling keeps QR well conditioned when columns differ in units.
    let mut scaled = a.clone();
    for mut c in scaled.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    let qr = scaled.qr();
    let r = qr.r();
    let q = qr.q();
    let rmax = r.diagonal().amax();
    let keep: Vec<usize> = (0..r.nrows().min(r.ncols()))
        .filter(|&i| r[(i, i)].abs() > rel_tol * rmax)
        .collect();
    DMatrix::from_fn(a.nrows(), keep.len(), |i, j| q[(i, keep[j])])
}

/// Principal angles (radians, ascending) between the column spaces of `a` and
/// `b`, computed from sines so that tiny angles are resolved accurately.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = orthonormal_basis(a, 1e-12);
    let qb = orthonormal_basis(b, 1e-12);
    let (qa, qb) = if qa.ncols() >= qb.ncols() {
        (qa, qb)
    } else {
        (qb, qa)
    };
    if qb.ncols() == 0 {
        return Vec::new();
    }
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let sv = residual.singular_values();
    let mut angles: Vec<f64> = sv.iter().map(|s| s.min(1.0).asin()).collect();
    angles.sort_by(|x, y| x.total_cmp(y));
    angles
}

/// Relative difference `|a - b| / max(|b|, floor)` in the max norm.
pub fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let den = b.amax().max(f64::MIN_POSITIVE);
    (a - b).amax() / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_single_dof() {
        let k = DMatrix::from_element(1, 1, 4.0);
        let m = DMatrix::from_element(1, 1, 2.0);
        let (vals, vecs) = generalized_eigen_dense(&k, &m).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14);
        assert!((vecs[(0, 0)].abs() - 1.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn principal_angles_of_rotated_basis_vanish() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 0.0]);
        let ang = principal_angles(&a, &b);
        assert!(ang.iter().all(|&t| t < 1e-14));
        let c = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let ang = principal_angles(&a, &c);
        assert!((ang[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn submatrix_and_spmv() {
        let a = csc_from_triplets(3, 3, [(0, 0, 1.0), (1, 2, 2.0), (2, 1, 3.0), (2, 1, 1.0)]);
        let s = submatrix(&a, &[2, 1], &[1, 2]);
        let d = to_dense(&s);
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 2.0]));
        let y = spmv(&a, &DVector::from_vec(vec![1.0, 1.0, 1.0]));
        assert_eq!(y.as_slice(), &[1.0, 2.0, 4.0]);
    }
}
