use super::Architecture;
use crate::error::{Error, Result};
use crate::linalg::SparseVec;
use nalgebra::{DMatrix, DVector};

/// Quadratic forms for linear systems.
///
/// The first `(n+m)(n+m+1)/2` coordinates are the upper triangle (row-major)
/// of `M^Q`, so `Q^θ(x,u) = zᵀM^Q z` with `z = (x,u)`; off-diagonal features
/// are `2 zᵢ zⱼ`. With a value block, the next `n(n+1)/2` coordinates hold `M`
/// for `J^θ(x) = xᵀMx`; otherwise `J^θ ≡ 0`.
#[derive(Debug, Clone)]
pub struct QuadBasis {
    pub n: usize,
    pub m: usize,
    pub value_block: bool,
}

fn tri_len(k: usize) -> usize {
    k * (k + 1) / 2
}

fn quad_features(z: &[f64], offset: usize, dim: usize) -> SparseVec {
    let k = z.len();
    let mut pairs = Vec::with_capacity(tri_len(k));
    let mut idx = offset;
    for i in 0..k {
        for j in i..k {
            let w = if i == j { 1.0 } else { 2.0 };
            pairs.push((idx, w * z[i] * z[j]));
            idx += 1;
        }
    }
    SparseVec::from_pairs(dim, pairs)
}

/// Symmetric matrix from its row-major upper triangle.
pub(crate) fn sym_from_tri(coords: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in i..k {
            m[(i, j)] = coords[idx];
            m[(j, i)] = coords[idx];
            idx += 1;
        }
    }
    m
}

pub(crate) fn tri_from_sym(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(tri_len(k));
    for i in 0..k {
        for j in i..k {
            out.push(0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

impl QuadBasis {
    pub fn new(n: usize, m: usize, value_block: bool) -> Self {
        QuadBasis { n, m, value_block }
    }

    pub fn q_len(&self) -> usize {
        tri_len(self.n + self.m)
    }

    /// `(M^Q, M)`; `M` is zero without a value block.
    pub fn matrices(&self, theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mq = sym_from_tri(&theta[..self.q_len()], self.n + self.m);
        let mj = if self.value_block {
            sym_from_tri(&theta[self.q_len()..], self.n)
        } else {
            DMatrix::zeros(self.n, self.n)
        };
        (mq, mj)
    }

    pub fn encode(&self, mq: &DMatrix<f64>, mj: Option<&DMatrix<f64>>) -> Vec<f64> {
        let mut theta = tri_from_sym(mq);
        if self.value_block {
            let zero = DMatrix::zeros(self.n, self.n);
            theta.extend(tri_from_sym(mj.unwrap_or(&zero)));
        }
        theta
    }
}

impl Architecture for QuadBasis {
    fn dim(&self) -> usize {
        self.q_len() + if self.value_block { tri_len(self.n) } else { 0 }
    }

    fn psi_j(&self, x: &[f64]) -> SparseVec {
        if self.value_block {
            quad_features(x, self.q_len(), self.dim())
        } else {
            SparseVec::zeros(self.dim())
        }
    }

    fn psi(&self, x: &[f64], u: &[f64]) -> SparseVec {
        let z: Vec<f64> = x.iter().chain(u).copied().collect();
        quad_features(&z, 0, self.dim())
    }

    fn descriptor(&self) -> String {
        format!("quad:n={}:m={}:value_block={}", self.n, self.m, self.value_block)
    }

    /// `u* = −M_G⁻¹Nx`, `Q̲(x) = xᵀ(M_F − NᵀM_G⁻¹N)x`; refuses when `M_G` is not PD.
    fn min_q_closed_form(&self, theta: &[f64], x: &[f64]) -> Option<Result<(Vec<f64>, f64)>> {
        let (mq, _) = self.matrices(theta);
        let (n, m) = (self.n, self.m);
        let mf = mq.view((0, 0), (n, n)).into_owned();
        let nb = mq.view((n, 0), (m, n)).into_owned();
        let mg = mq.view((n, n), (m, m)).into_owned();
        let chol = match mg.cholesky() {
            Some(c) => c,
            None => {
                return Some(Err(Error::NotPositiveDefinite(
                    "input block of the Q-matrix; Q̲ is not defined".into(),
                )))
            }
        };
        let xv = DVector::from_column_slice(x);
        let nx = &nb * &xv;
        let u = -chol.solve(&nx);
        let val = xv.dot(&(&mf * &xv)) + nx.dot(&u);
        Some(Ok((u.as_slice().to_vec(), val)))
    }
}
