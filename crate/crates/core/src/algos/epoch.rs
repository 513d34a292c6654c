use super::ConstraintMode;
use crate::approx::ConstraintSpec;
use crate::error::{Error, Result};
use crate::linalg::{csr_from_dense, csr_from_rows, csr_vstack, SparseVec};
use crate::losses::BatchLossData;
use crate::qpcore::{solve_qp_warm, QpSettings, QpSolution, QpStatus, QuadraticProgram, WarmStart};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

/// The convex program solved in one epoch, over `[θ; s]` where `s` holds one
/// slack per positivity-penalty row:
///
/// ```text
///   min  −μᵀθ + κ ℰ(θ) + κ⁺ Σ wᵣ sᵣ² + lᵀθ + (1/(2α)) (θ−θₙ)ᵀW(θ−θₙ)
///   s.t. sᵣ ≥ dᵀθ for every difference d of row r,   s ≥ 0
///        mode constraints on z(θ), z⁺(θ);  θ in the architecture's cone
/// ```
pub struct EpochProgram<'a> {
    pub data: &'a BatchLossData,
    pub kappa_be: f64,
    pub kappa_plus: f64,
    pub mode: ConstraintMode,
    pub tol: f64,
    pub constraint: ConstraintSpec,
    /// Extra linear term `l`.
    pub linear: Option<&'a DVector<f64>>,
    /// `(α, W, θₙ)`
    pub prox: Option<(f64, &'a DMatrix<f64>, &'a DVector<f64>)>,
}

impl EpochProgram<'_> {
    fn uses_penalty(&self) -> bool {
        self.kappa_plus > 0.0 && self.mode != ConstraintMode::AdvantageCone && !self.data.plus.is_empty()
    }

    pub fn n_slack(&self) -> usize {
        if self.uses_penalty() {
            self.data.plus.len()
        } else {
            0
        }
    }

    pub fn build(&self) -> QuadraticProgram {
        let d = self.data.d;
        let ns = self.n_slack();
        let nx = d + ns;
        let mut p = DMatrix::zeros(nx, nx);
        let mut q = DVector::zeros(nx);
        {
            let mut block = p.view_mut((0, 0), (d, d));
            block += &self.data.p * (2.0 * self.kappa_be);
        }
        let mut qt = -&self.data.mu + &self.data.q * (2.0 * self.kappa_be);
        if let Some(l) = self.linear {
            qt += l;
        }
        if let Some((alpha, w, theta_n)) = self.prox {
            if alpha.is_finite() {
                let mut block = p.view_mut((0, 0), (d, d));
                block += w / alpha;
                qt -= w * theta_n / alpha;
            }
        }
        q.rows_mut(0, d).copy_from(&qt);
        for (r, row) in self.data.plus.iter().enumerate().take(ns) {
            p[(d + r, d + r)] = 2.0 * self.kappa_plus * row.weight;
        }

        let widen = |m: &CsrMatrix<f64>| -> CsrMatrix<f64> {
            let rows: Vec<SparseVec> = m
                .row_iter()
                .map(|r| {
                    SparseVec::from_pairs(nx, r.col_indices().iter().copied().zip(r.values().iter().copied()).collect())
                })
                .collect();
            csr_from_rows(nx, &rows)
        };

        let mut in_rows: Vec<SparseVec> = Vec::new();
        let mut in_rhs: Vec<f64> = Vec::new();
        for (r, row) in self.data.plus.iter().enumerate().take(ns) {
            for diff in &row.diffs {
                let mut pairs: Vec<(usize, f64)> = diff.iter().collect();
                pairs.push((d + r, -1.0));
                in_rows.push(SparseVec::from_pairs(nx, pairs));
                in_rhs.push(0.0);
            }
        }
        let mut a_in = csr_from_rows(nx, &in_rows);
        let mut b_in = DVector::from_vec(in_rhs);
        let mut a_eq = CsrMatrix::zeros(0, nx);
        let mut b_eq = DVector::zeros(0);
        let g = widen(&self.data.g);
        match self.mode {
            ConstraintMode::Penalty => {}
            ConstraintMode::HardGalerkin => {
                a_eq = g;
                b_eq = self.data.h.clone();
                let gp = widen(&self.data.g_plus);
                let bp = DVector::from_element(gp.nrows(), self.tol);
                a_in = csr_vstack(nx, &[&a_in, &gp]);
                b_in = concat(&b_in, &bp);
            }
            ConstraintMode::AdvantageCone => {
                // z = h − Gθ ≥ −Tol
                let rhs = self.data.h.add_scalar(self.tol);
                a_in = csr_vstack(nx, &[&a_in, &g]);
                b_in = concat(&b_in, &rhs);
            }
        }
        let mut lo = DVector::from_element(nx, f64::NEG_INFINITY);
        let hi = DVector::from_element(nx, f64::INFINITY);
        for r in 0..ns {
            lo[d + r] = 0.0;
        }
        match &self.constraint {
            ConstraintSpec::None => {}
            ConstraintSpec::AdvantageCone { d_j } => {
                for i in *d_j..d {
                    lo[i] = 0.0;
                }
            }
            ConstraintSpec::Custom(y) => {
                let mut wide = DMatrix::zeros(y.nrows(), nx);
                wide.view_mut((0, 0), (y.nrows(), d)).copy_from(y);
                let yc = csr_from_dense(&wide);
                a_in = csr_vstack(nx, &[&a_in, &yc]);
                b_in = concat(&b_in, &DVector::zeros(y.nrows()));
            }
        }
        QuadraticProgram::new(p, q)
            .with_equalities(a_eq, b_eq)
            .with_inequalities(a_in, b_in)
            .with_bounds(lo, hi)
    }

    /// Solves from `start` and returns `θ` with the raw solution.
    pub fn solve(&self, settings: &QpSettings, start: &DVector<f64>) -> Result<(DVector<f64>, QpSolution)> {
        let d = self.data.d;
        let ns = self.n_slack();
        let mut x0 = DVector::zeros(d + ns);
        x0.rows_mut(0, d).copy_from(start);
        for (r, row) in self.data.plus.iter().enumerate().take(ns) {
            x0[d + r] = row.diffs.iter().map(|v| v.dot(start.as_slice())).fold(0.0_f64, f64::max);
        }
        let prob = self.build();
        let sol = solve_qp_warm(&prob, settings, Some(&WarmStart { theta: x0, y: None }))?;
        match sol.status {
            QpStatus::Optimal | QpStatus::MaxIter => Ok((sol.theta.rows(0, d).into_owned(), sol)),
            QpStatus::Infeasible => Err(Error::Infeasible(format!(
                "epoch program (primal residual {:e})",
                sol.kkt.primal
            ))),
            QpStatus::Unbounded => Err(Error::Unbounded(
                "epoch program; μ may weigh states the data never constrains".into(),
            )),
        }
    }
}

fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}
