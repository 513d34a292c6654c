use super::{solve_qp_warm, QpSettings, QpStatus, QuadraticProgram, WarmStart};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{csr_mul, csr_tmul};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

/// Solves `H θ = r`, falling back to the pseudo-inverse when `H` is singular.
pub(crate) fn solve_psd(h: &DMatrix<f64>, r: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = h.clone().cholesky() {
        return ch.solve(r);
    }
    let svd = h.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1.0);
    svd.solve(r, eps).unwrap_or_else(|_| DVector::zeros(r.len()))
}

/// One proximal step on the loss `ℰ(θ) = θᵀPθ + 2qᵀθ + k₀`:
///
/// `argmin_θ ℰ(θ) + (1/α) ½ ‖θ − θₙ‖²_W`, i.e. `(2P + W/α) θ = W θₙ/α − 2q`.
///
/// `alpha = ∞` switches the regularizer off and returns the least-norm
/// minimizer of `ℰ`. With `constraints` set, the same objective is minimized
/// under the given constraint blocks (its `p`/`q` fields are ignored).
pub fn prox_step(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    theta_n: &DVector<f64>,
    alpha: f64,
    w: &DMatrix<f64>,
    constraints: Option<(&QuadraticProgram, &QpSettings)>,
) -> Result<DVector<f64>> {
    let d = q.len();
    check_dim("prox loss hessian", d, p.nrows())?;
    check_dim("prox theta", d, theta_n.len())?;
    check_dim("prox gain", d, w.nrows())?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("step size {alpha} must be positive")));
    }
    let inv_a = if alpha.is_infinite() { 0.0 } else { 1.0 / alpha };
    if inv_a > 0.0 && w.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("prox gain W".into()));
    }
    let h = p * 2.0 + w * inv_a;
    let r = w * theta_n * inv_a - q * 2.0;
    match constraints {
        None => Ok(solve_psd(&h, &r)),
        Some((tmpl, settings)) => {
            let mut prob = tmpl.clone();
            prob.p = h;
            prob.q = -r;
            let sol = solve_qp_warm(
                &prob,
                settings,
                Some(&WarmStart {
                    theta: theta_n.clone(),
                    y: None,
                }),
            )?;
            match sol.status {
                QpStatus::Optimal => Ok(sol.theta),
                QpStatus::Infeasible => Err(Error::Infeasible("prox step constraints".into())),
                QpStatus::Unbounded => Err(Error::Unbounded("prox step".into())),
                QpStatus::MaxIter => Err(Error::NonConvergence {
                    what: "prox step QP",
                    iterations: sol.iterations,
                    residual: sol.kkt.max(),
                }),
            }
        }
    }
}

/// Data for one primal-dual epoch.
///
/// The primal objective is `θᵀPθ + cᵀθ − λᵀz(θ) + (1/α)½‖θ − θₙ‖²` over
/// `θ ≥ lo` (a box cone), with the Galerkin vector `z(θ) = h − Gθ`.
pub struct PrimalDualStep<'a> {
    pub p: &'a DMatrix<f64>,
    pub c: &'a DVector<f64>,
    pub g: &'a CsrMatrix<f64>,
    pub h: &'a DVector<f64>,
    pub lo: &'a DVector<f64>,
}

/// θ-step over the cone followed by the clamped multiplier step
/// `λ ← [λ − α z(θₙ₊₁)]` projected onto `[0, λ_max]`.
pub fn primal_dual_step(
    step: &PrimalDualStep<'_>,
    theta_n: &DVector<f64>,
    lambda_n: &DVector<f64>,
    alpha: f64,
    lambda_max: &DVector<f64>,
    settings: &QpSettings,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let d = theta_n.len();
    let m = step.g.nrows();
    check_dim("primal-dual multipliers", m, lambda_n.len())?;
    check_dim("primal-dual lambda_max", m, lambda_max.len())?;
    check_dim("primal-dual cone", d, step.lo.len())?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {alpha} must be positive")));
    }
    let mut h = step.p * 2.0;
    for i in 0..d {
        h[(i, i)] += 1.0 / alpha;
    }
    let lin = step.c + csr_tmul(step.g, lambda_n) - theta_n / alpha;
    let theta = if step.lo.iter().all(|v| !v.is_finite()) {
        solve_psd(&h, &(-lin))
    } else {
        let prob = QuadraticProgram::new(h, lin).with_bounds(
            step.lo.clone(),
            DVector::from_element(d, f64::INFINITY),
        );
        let start = theta_n.zip_map(step.lo, |t, l| t.max(l));
        let sol = solve_qp_warm(
            &prob,
            settings,
            Some(&WarmStart {
                theta: start,
                y: None,
            }),
        )?;
        match sol.status {
            QpStatus::Optimal => sol.theta,
            QpStatus::Infeasible => return Err(Error::Infeasible("primal-dual cone".into())),
            QpStatus::Unbounded => return Err(Error::Unbounded("primal-dual step".into())),
            QpStatus::MaxIter => {
                return Err(Error::NonConvergence {
                    what: "primal-dual QP",
                    iterations: sol.iterations,
                    residual: sol.kkt.max(),
                })
            }
        }
    };
    let z = step.h - csr_mul(step.g, &theta);
    let lambda = DVector::from_fn(m, |i, _| {
        (lambda_n[i] - alpha * z[i]).clamp(0.0, lambda_max[i])
    });
    Ok((theta, lambda))
}

/// `W + β (A − W)`.
pub fn zap_gain_update(w: &DMatrix<f64>, a: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("gain step {beta} outside (0, 1]")));
    }
    check_dim("zap gain rows", w.nrows(), a.nrows())?;
    check_dim("zap gain cols", w.ncols(), a.ncols())?;
    Ok(w + (a - w) * beta)
}
