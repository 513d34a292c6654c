//! Small sparse/dense helpers shared by the feature, loss and solver code.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

/// Sparse vector with sorted, unique indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        SparseVec {
            dim,
            idx: Vec::new(),
            val: Vec::new(),
        }
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        debug_assert!(i < dim);
        SparseVec {
            dim,
            idx: vec![i],
            val: vec![1.0],
        }
    }

    /// Builds from unsorted `(index, value)` pairs, summing duplicates and dropping zeros.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut idx = Vec::with_capacity(pairs.len());
        let mut val: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            debug_assert!(i < dim, "index {i} out of range {dim}");
            if idx.last() == Some(&i) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(i);
                val.push(v);
            }
        }
        let mut out = SparseVec { dim, idx, val };
        out.prune();
        out
    }

    pub fn from_dense(v: &[f64]) -> Self {
        let pairs = v
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != 0.0)
            .map(|(i, x)| (i, *x))
            .collect();
        SparseVec::from_pairs(v.len(), pairs)
    }

    fn prune(&mut self) {
        let mut k = 0;
        for j in 0..self.idx.len() {
            if self.val[j] != 0.0 {
                self.idx[k] = self.idx[j];
                self.val[k] = self.val[j];
                k += 1;
            }
        }
        self.idx.truncate(k);
        self.val.truncate(k);
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }

    pub fn to_dense(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (i, v) in self.iter() {
            out[i] += v;
        }
        out
    }

    pub fn scale(&self, s: f64) -> SparseVec {
        let mut out = self.clone();
        out.val.iter_mut().for_each(|v| *v *= s);
        out.prune();
        out
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &SparseVec) -> SparseVec {
        debug_assert_eq!(self.dim, other.dim);
        let mut pairs: Vec<(usize, f64)> = self.iter().collect();
        pairs.extend(other.iter().map(|(i, v)| (i, s * v)));
        SparseVec::from_pairs(self.dim, pairs)
    }

    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &SparseVec) -> SparseVec {
        self.axpy(1.0, other)
    }

    /// Accumulates `w * self * self^T` into a dense symmetric matrix.
    pub fn add_outer_to(&self, w: f64, m: &mut DMatrix<f64>) {
        for (i, vi) in self.iter() {
            for (j, vj) in self.iter() {
                m[(i, j)] += w * vi * vj;
            }
        }
    }

    /// Accumulates `w * self` into a dense vector.
    pub fn add_to(&self, w: f64, out: &mut DVector<f64>) {
        for (i, v) in self.iter() {
            out[i] += w * v;
        }
    }
}

/// Builds a CSR matrix with `ncols` columns from sparse rows.
pub fn csr_from_rows(ncols: usize, rows: &[SparseVec]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(rows.len(), ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter() {
            coo.push(r, c, v);
        }
    }
    CsrMatrix::from(&coo)
}

/// Converts a dense matrix to CSR, dropping exact zeros.
pub fn csr_from_dense(m: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if v != 0.0 {
                coo.push(r, c, v);
            }
        }
    }
    CsrMatrix::from(&coo)
}

pub fn csr_empty(ncols: usize) -> CsrMatrix<f64> {
    CsrMatrix::zeros(0, ncols)
}

/// `A x` for CSR `A`.
pub fn csr_mul(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for (r, row) in a.row_iter().enumerate() {
        let mut s = 0.0;
        for (c, v) in row.col_indices().iter().zip(row.values()) {
            s += v * x[*c];
        }
        out[r] = s;
    }
    out
}

/// `A^T y` for CSR `A`.
pub fn csr_tmul(a: &CsrMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.ncols());
    for (r, row) in a.row_iter().enumerate() {
        let yr = y[r];
        if yr == 0.0 {
            continue;
        }
        for (c, v) in row.col_indices().iter().zip(row.values()) {
            out[*c] += v * yr;
        }
    }
    out
}

/// Stacks CSR blocks vertically (all must share the column count).
pub fn csr_vstack(ncols: usize, blocks: &[&CsrMatrix<f64>]) -> CsrMatrix<f64> {
    let nrows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut coo = CooMatrix::new(nrows, ncols);
    let mut offset = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), ncols);
        for (r, row) in b.row_iter().enumerate() {
            for (c, v) in row.col_indices().iter().zip(row.values()) {
                coo.push(offset + r, *c, *v);
            }
        }
        offset += b.nrows();
    }
    CsrMatrix::from(&coo)
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Eigenvector for the smallest eigenvalue of a symmetric matrix.
pub fn min_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let (k, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    (val, eig.eigenvectors.column(k).into_owned())
}

/// Cheap PSD screen: Cholesky of `m + eps I` must succeed.
pub fn is_psd(m: &DMatrix<f64>, rel_floor: f64) -> bool {
    let n = m.nrows();
    if n == 0 {
        return true;
    }
    let scale = m.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    let shifted = m + DMatrix::identity(n, n) * (rel_floor * scale);
    shifted.cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_from_pairs_merges_duplicates_and_zeros() {
        let v = SparseVec::from_pairs(5, vec![(3, 1.0), (1, 2.0), (3, -1.0), (4, 0.5)]);
        assert_eq!(v.idx, vec![1, 4]);
        assert_eq!(v.val, vec![2.0, 0.5]);
    }

    #[test]
    fn csr_products_match_dense() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 3.0]);
        let a = csr_from_dense(&m);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![0.5, -1.0]);
        assert_eq!(csr_mul(&a, &x), &m * &x);
        assert_eq!(csr_tmul(&a, &y), m.transpose() * &y);
    }

    #[test]
    fn psd_screen() {
        let good = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(is_psd(&good, 1e-9));
        assert!(!is_psd(&bad, 1e-9));
    }
}
