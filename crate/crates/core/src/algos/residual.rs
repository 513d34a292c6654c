use crate::approx::{min_q, Architecture};
use crate::env::{ControlSystem, Criterion};
use crate::error::{check_dim, Error, Result};
use crate::explore::Trajectory;
use crate::losses::ZetaSpec;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// `f̄(θ) = (1/N) Σ 𝒟ₖ₊₁(θ) ζₖ` with the Watkins temporal difference
/// `𝒟ₖ₊₁ = −Q^θ(x(k),u(k)) + c + γQ̲^θ(x(k+1))`.
///
/// [`ZetaSpec::Features`] gives `ζₖ = ψ(x(k),u(k)) = ∇_θ Q^θ`, the DQN
/// fixed-point condition.
pub fn projected_bellman_residual<S, A>(
    sys: &S,
    traj: &Trajectory,
    arch: &A,
    theta: &[f64],
    zeta: &ZetaSpec,
    criterion: Criterion,
) -> Result<DVector<f64>>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    check_dim("theta", arch.dim(), theta.len())?;
    if traj.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let map = zeta.resolve(traj);
    let mut f = DVector::zeros(map.dim(arch));
    let inv = 1.0 / traj.len() as f64;
    for k in 0..traj.len() {
        let (x, u, xn) = (&traj.states[k], &traj.inputs[k], &traj.next[k]);
        let (_, qmin) = min_q(arch, theta, xn, &sys.inputs(xn))?;
        let td = -arch.psi(x, u).dot(theta) + traj.costs[k] + criterion.gamma * qmin;
        for (i, w) in map.entries(arch, k, x, u) {
            f[i] += inv * td * w;
        }
    }
    Ok(f)
}

/// Finite-difference estimate of the Lipschitz constant of `f̄` near `θ`
/// (Frobenius norm of the central-difference Jacobian). Infinite when `f̄`
/// cannot be evaluated at a perturbed point, e.g. where `Q̲^θ` is undefined.
#[allow(clippy::too_many_arguments)]
pub fn local_lipschitz<S, A>(
    sys: &S,
    traj: &Trajectory,
    arch: &A,
    theta: &[f64],
    zeta: &ZetaSpec,
    criterion: Criterion,
    rel_step: f64,
) -> f64
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    let mut total = 0.0;
    for i in 0..theta.len() {
        let h = rel_step * theta[i].abs().max(1.0);
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let fp = projected_bellman_residual(sys, traj, arch, &plus, zeta, criterion);
        let fm = projected_bellman_residual(sys, traj, arch, &minus, zeta, criterion);
        match (fp, fm) {
            (Ok(a), Ok(b)) => total += ((a - b) / (2.0 * h)).norm_squared(),
            _ => return f64::INFINITY,
        }
    }
    total.sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residual: Vec<f64>,
    pub norm_inf: f64,
    pub norm2: f64,
    pub lipschitz: f64,
    /// The vector field is steep (or undefined) near `θ`.
    pub non_lipschitz: bool,
}

/// Residual, its norms and the local steepness of the vector field.
#[allow(clippy::too_many_arguments)]
pub fn residual_report<S, A>(
    sys: &S,
    traj: &Trajectory,
    arch: &A,
    theta: &[f64],
    zeta: &ZetaSpec,
    criterion: Criterion,
    lipschitz_limit: f64,
) -> Result<ResidualReport>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    let f = projected_bellman_residual(sys, traj, arch, theta, zeta, criterion)?;
    let lipschitz = local_lipschitz(sys, traj, arch, theta, zeta, criterion, 1e-6);
    Ok(ResidualReport {
        norm_inf: f.amax(),
        norm2: f.norm(),
        residual: f.as_slice().to_vec(),
        non_lipschitz: !(lipschitz <= lipschitz_limit),
        lipschitz,
    })
}
