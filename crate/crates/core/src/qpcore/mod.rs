//! Convex quadratic programming.
//!
//! Every learning algorithm in the crate reduces each epoch to one problem of
//! the form
//!
//! ```text
//!     minimize    1/2 θ' P θ + q' θ
//!     subject to  A_eq θ  = b_eq
//!                 A_in θ <= b_in
//!                 lo <= θ <= hi
//! ```
//!
//! which is solved by [`solve_qp`]: an operator-splitting (ADMM) iteration with
//! Ruiz equilibration, over-relaxation and adaptive penalty, followed by an
//! active-set polish that usually lands on the exact KKT point. The returned
//! [`QpSolution`] always carries its KKT residuals, so callers can certify the
//! answer independently of how it was produced.

mod admm;
mod prox;

pub use admm::solve_qp_warm;
pub use prox::{primal_dual_step, prox_step, zap_gain_update, PrimalDualStep};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{csr_empty, is_psd};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

/// `minimize ½θᵀPθ + qᵀθ` under linear equality, inequality and box constraints.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: CsrMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: CsrMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl QuadraticProgram {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        QuadraticProgram {
            p,
            q,
            a_eq: csr_empty(n),
            b_eq: DVector::zeros(0),
            a_in: csr_empty(n),
            b_in: DVector::zeros(0),
            lo: DVector::from_element(n, f64::NEG_INFINITY),
            hi: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a: CsrMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: CsrMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lo: DVector<f64>, hi: DVector<f64>) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, theta: &DVector<f64>) -> f64 {
        0.5 * theta.dot(&(&self.p * theta)) + self.q.dot(theta)
    }

    /// Dimension, symmetry and PSD checks.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_dim("QP hessian rows", n, self.p.nrows())?;
        check_dim("QP hessian cols", n, self.p.ncols())?;
        check_dim("QP equality columns", n, self.a_eq.ncols())?;
        check_dim("QP equality rhs", self.a_eq.nrows(), self.b_eq.len())?;
        check_dim("QP inequality columns", n, self.a_in.ncols())?;
        check_dim("QP inequality rhs", self.a_in.nrows(), self.b_in.len())?;
        check_dim("QP lower bounds", n, self.lo.len())?;
        check_dim("QP upper bounds", n, self.hi.len())?;
        let scale = self.p.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
        if (&self.p - self.p.transpose()).amax() > 1e-9 * scale {
            return Err(Error::InvalidParameter("QP hessian is not symmetric".into()));
        }
        if !is_psd(&self.p, 1e-9) {
            return Err(Error::NotPositiveDefinite(
                "QP hessian has a negative eigenvalue".into(),
            ));
        }
        for i in 0..n {
            if self.lo[i] > self.hi[i] {
                return Err(Error::Infeasible(format!(
                    "box bound {i}: lo {} > hi {}",
                    self.lo[i], self.hi[i]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Raw (unscaled) KKT residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// Largest constraint violation.
    pub primal: f64,
    /// `‖Pθ + q + Aᵀy‖∞`
    pub stationarity: f64,
    /// Largest `|y_i| · slack_i` over constraints with a nonzero multiplier.
    pub complementarity: f64,
    /// Magnitudes used to make the checks relative.
    pub primal_scale: f64,
    pub dual_scale: f64,
}

impl KktResiduals {
    pub fn certified(&self, tol: f64) -> bool {
        self.primal <= tol * self.primal_scale.max(1.0)
            && self.stationarity <= tol * self.dual_scale.max(1.0)
            && self.complementarity <= tol * self.dual_scale.max(1.0)
    }

    pub fn max(&self) -> f64 {
        self.primal.max(self.stationarity).max(self.complementarity)
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub theta: DVector<f64>,
    /// Multipliers of `A_eq θ = b_eq` (free sign).
    pub y_eq: DVector<f64>,
    /// Multipliers of `A_in θ <= b_in` (non-negative).
    pub y_in: DVector<f64>,
    /// Signed box multipliers: positive at an active upper bound, negative at a lower one.
    pub y_box: DVector<f64>,
    pub status: QpStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub objective: f64,
    pub polished: bool,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub scaling_iters: usize,
    pub polish: bool,
    pub adaptive_rho: bool,
    pub check_every: usize,
    pub infeasibility_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol: 1e-8,
            max_iter: 50_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iters: 10,
            polish: true,
            adaptive_rho: true,
            check_every: 10,
            infeasibility_tol: 1e-6,
        }
    }
}

/// Solves `prob` from a cold start.
pub fn solve_qp(prob: &QuadraticProgram, settings: &QpSettings) -> Result<QpSolution> {
    solve_qp_warm(prob, settings, None)
}

/// Warm-start data in the original (unscaled) coordinates.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub theta: DVector<f64>,
    /// Stacked multipliers `[y_eq; y_in; y_box(bounded coords)]`, if known.
    pub y: Option<DVector<f64>>,
}
