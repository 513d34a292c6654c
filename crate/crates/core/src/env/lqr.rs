use super::{ControlSystem, InputSet};
use crate::error::{check_dim, Error, Result};
use crate::linalg::is_psd;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Linear system `x⁺ = Fx + Gu` with cost `xᵀSx + uᵀRu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrSystem {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LqrSystem {
    pub fn new(f: DMatrix<f64>, g: DMatrix<f64>, s: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = f.nrows();
        check_dim("LQR F columns", n, f.ncols())?;
        check_dim("LQR G rows", n, g.nrows())?;
        let m = g.ncols();
        check_dim("LQR S rows", n, s.nrows())?;
        check_dim("LQR S columns", n, s.ncols())?;
        check_dim("LQR R rows", m, r.nrows())?;
        check_dim("LQR R columns", m, r.ncols())?;
        if !is_psd(&s, 1e-12) {
            return Err(Error::NotPositiveDefinite("state weight S".into()));
        }
        if r.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("input weight R".into()));
        }
        Ok(LqrSystem { f, g, s, r })
    }

    /// `S = HᵀH`.
    pub fn from_output(f: DMatrix<f64>, g: DMatrix<f64>, h: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let s = h.transpose() * &h;
        Self::new(f, g, s, r)
    }

    pub fn scalar(f: f64, g: f64, s: f64, r: f64) -> Result<Self> {
        let one = |v| DMatrix::from_element(1, 1, v);
        Self::new(one(f), one(g), one(s), one(r))
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    /// Block cost matrix `M^c = diag(S, R)` on `z = (x, u)`.
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut mc = DMatrix::zeros(n + m, n + m);
        mc.view_mut((0, 0), (n, n)).copy_from(&self.s);
        mc.view_mut((n, n), (m, m)).copy_from(&self.r);
        mc
    }
}

impl ControlSystem for LqrSystem {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn input_dim(&self) -> usize {
        self.m()
    }

    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        let u = DVector::from_column_slice(u);
        (&self.f * x + &self.g * u).as_slice().to_vec()
    }

    fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        let u = DVector::from_column_slice(u);
        x.dot(&(&self.s * &x)) + u.dot(&(&self.r * &u))
    }

    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.n()], vec![0.0; self.m()])
    }

    fn inputs(&self, _x: &[f64]) -> InputSet {
        InputSet::Box {
            lo: vec![f64::NEG_INFINITY; self.m()],
            hi: vec![f64::INFINITY; self.m()],
        }
    }
}
