//! Dense third- and fourth-order tensors (row-major, last index fastest).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self {
            dims: [d0, d1, d2],
            data: vec![0.0; d0 * d1 * d2],
        }
    }

    pub fn cube(n: usize) -> Self {
        Self::zeros(n, n, n)
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Option<Self> {
        (data.len() == dims.iter().product::<usize>()).then_some(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let p = self.idx(i, j, k);
        self.data[p] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let p = self.idx(i, j, k);
        self.data[p] += v;
    }

    /// `T : (x ⊗ y)`, i.e. `sum_jk T_ijk x_j y_k`.
    pub fn contract2(&self, x: &[f64], y: &[f64]) -> DVector<f64> {
        let [d0, d1, d2] = self.dims;
        assert!(x.len() == d1 && y.len() == d2);
        DVector::from_fn(d0, |i, _| {
            let mut s = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                let row = &self.data[(i * d1 + j) * d2..(i * d1 + j + 1) * d2];
                s += xj * row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            }
            s
        })
    }

    /// `T · v` contracting the last index: `(T v)_ij = sum_k T_ijk v_k`.
    pub fn contract_last(&self, v: &[f64]) -> DMatrix<f64> {
        let [d0, d1, d2] = self.dims;
        assert_eq!(v.len(), d2);
        DMatrix::from_fn(d0, d1, |i, j| {
            let row = &self.data[(i * d1 + j) * d2..(i * d1 + j + 1) * d2];
            row.iter().zip(v).map(|(a, b)| a * b).sum()
        })
    }

    /// Tensor with the second and third axes swapped.
    pub fn permute_132(&self) -> Self {
        let [d0, d1, d2] = self.dims;
        let mut out = Self::zeros(d0, d2, d1);
        for i in 0..d0 {
            for j in 0..d1 {
                for k in 0..d2 {
                    out.set(i, k, j, self.get(i, j, k));
                }
            }
        }
        out
    }

    /// Average over all six axis permutations (cubic tensors only).
    pub fn symmetrized(&self) -> Self {
        let n = self.dims[0];
        assert!(self.dims.iter().all(|&d| d == n), "symmetrize needs a cube");
        let mut out = Self::cube(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = self.get(i, j, k)
                        + self.get(i, k, j)
                        + self.get(j, i, k)
                        + self.get(j, k, i)
                        + self.get(k, i, j)
                        + self.get(k, j, i);
                    out.set(i, j, k, s / 6.0);
                }
            }
        }
        out
    }

    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest deviation from full permutation symmetry.
    pub fn asymmetry(&self) -> f64 {
        let s = self.symmetrized();
        self.data
            .iter()
            .zip(&s.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

const PERMS4: [[usize; 4]; 24] = [
    [0, 1, 2, 3],
    [0, 1, 3, 2],
    [0, 2, 1, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [0, 3, 2, 1],
    [1, 0, 2, 3],
    [1, 0, 3, 2],
    [1, 2, 0, 3],
    [1, 2, 3, 0],
    [1, 3, 0, 2],
    [1, 3, 2, 0],
    [2, 0, 1, 3],
    [2, 0, 3, 1],
    [2, 1, 0, 3],
    [2, 1, 3, 0],
    [2, 3, 0, 1],
    [2, 3, 1, 0],
    [3, 0, 1, 2],
    [3, 0, 2, 1],
    [3, 1, 0, 2],
    [3, 1, 2, 0],
    [3, 2, 0, 1],
    [3, 2, 1, 0],
];

impl Tensor4 {
    pub fn zeros(d0: usize, d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: [d0, d1, d2, d3],
            data: vec![0.0; d0 * d1 * d2 * d3],
        }
    }

    pub fn cube(n: usize) -> Self {
        Self::zeros(n, n, n, n)
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Option<Self> {
        (data.len() == dims.iter().product::<usize>()).then_some(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dims[1] + j) * self.dims[2] + k) * self.dims[3] + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let p = self.idx(i, j, k, l);
        self.data[p] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let p = self.idx(i, j, k, l);
        self.data[p] += v;
    }

    /// `T ⋮ (x ⊗ y ⊗ z)`.
    pub fn contract3(&self, x: &[f64], y: &[f64], z: &[f64]) -> DVector<f64> {
        let [d0, d1, d2, d3] = self.dims;
        assert!(x.len() == d1 && y.len() == d2 && z.len() == d3);
        DVector::from_fn(d0, |i, _| {
            let mut s = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                for (k, &yk) in y.iter().enumerate() {
                    if yk == 0.0 {
                        continue;
                    }
                    let base = ((i * d1 + j) * d2 + k) * d3;
                    let row = &self.data[base..base + d3];
                    s += xj * yk * row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            s
        })
    }

    /// `T : (x ⊗ y)` over the last two indices, giving a matrix in the first two.
    pub fn contract_last2(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let [d0, d1, d2, d3] = self.dims;
        assert!(x.len() == d2 && y.len() == d3);
        DMatrix::from_fn(d0, d1, |i, j| {
            let mut s = 0.0;
            for (k, &xk) in x.iter().enumerate() {
                let base = ((i * d1 + j) * d2 + k) * d3;
                let row = &self.data[base..base + d3];
                s += xk * row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            }
            s
        })
    }

    /// Tensor with axes reordered so that `out[i0,i1,i2,i3] = self[i_{p0}, ...]`
    /// where `perm` lists, for each source axis, its new position.
    pub fn permuted(&self, perm: [usize; 4]) -> Self {
        let d = self.dims;
        let mut nd = [0; 4];
        for a in 0..4 {
            nd[perm[a]] = d[a];
        }
        let mut out = Self::zeros(nd[0], nd[1], nd[2], nd[3]);
        let mut dst = [0usize; 4];
        for i in 0..d[0] {
            for j in 0..d[1] {
                for k in 0..d[2] {
                    for l in 0..d[3] {
                        let src = [i, j, k, l];
                        for a in 0..4 {
                            dst[perm[a]] = src[a];
                        }
                        out.set(dst[0], dst[1], dst[2], dst[3], self.get(i, j, k, l));
                    }
                }
            }
        }
        out
    }

    /// Average over all 24 axis permutations (cubic tensors only).
    pub fn symmetrized(&self) -> Self {
        let n = self.dims[0];
        assert!(self.dims.iter().all(|&d| d == n), "symmetrize needs a cube");
        let mut out = Self::cube(n);
        let mut ix = [0usize; 4];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let src = [i, j, k, l];
                        let mut s = 0.0;
                        for p in &PERMS4 {
                            for a in 0..4 {
                                ix[a] = src[p[a]];
                            }
                            s += self.get(ix[0], ix[1], ix[2], ix[3]);
                        }
                        out.set(i, j, k, l, s / 24.0);
                    }
                }
            }
        }
        out
    }

    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let s = self.symmetrized();
        self.data
            .iter()
            .zip(&s.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_and_symmetrize() {
        let mut t = Tensor3::cube(2);
        t.set(0, 0, 1, 3.0);
        let p = t.permute_132();
        assert_eq!(p.get(0, 1, 0), 3.0);
        let s = t.symmetrized();
        assert!((s.get(1, 0, 0) - 1.0).abs() < 1e-15);
        assert!(s.asymmetry() < 1e-15);
    }

    #[test]
    fn tensor4_contractions_agree() {
        let n = 3;
        let mut t = Tensor4::cube(n);
        for (p, v) in t.data.iter_mut().enumerate() {
            *v = (p as f64 * 0.37).sin();
        }
        let x = [0.3, -1.0, 2.0];
        let y = [1.5, 0.2, -0.7];
        let z = [0.1, 0.4, 0.9];
        let full = t.contract3(&x, &y, &z);
        let m = t.contract_last2(&y, &z);
        let via = m * DVector::from_column_slice(&x);
        assert!((full - via).amax() < 1e-13);
        let q = t.permuted([0, 2, 1, 3]);
        assert_eq!(q.get(0, 2, 1, 0), t.get(0, 1, 2, 0));
    }
}
