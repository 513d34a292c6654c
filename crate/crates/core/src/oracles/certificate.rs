use super::vi::value_iteration;
use crate::env::{Criterion, FiniteSystem};
use crate::error::{check_dim, Result};
use serde::{Deserialize, Serialize};

/// Feasibility of a pair `(J, Q)` for the dynamic-programming LP, and how it
/// compares with the optimal value.
///
/// Violations are signed maxima: positive means the constraint fails.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DplpReport {
    /// `max Q − c − γJ∘F`
    pub bellman: f64,
    /// `max J − Q`
    pub advantage: f64,
    /// `|J(xᵉ)|`
    pub equilibrium: f64,
    /// `max (1−ϱ)c + γJ∘F − Q`, when `ϱ` was supplied.
    pub tightened: Option<f64>,
    /// `max J − J°`; never positive for a feasible pair.
    pub dominance: f64,
    /// `max |J − J°|`
    pub gap: f64,
    /// First pair violating the Bellman or advantage constraint.
    pub first_violation: Option<(usize, usize)>,
    pub feasible: bool,
    /// Feasible with `J = J°` (the LP optimum for any full-support `μ`).
    pub optimal: bool,
}

/// Checks `Q ≤ c + γJ∘F`, `Q ≥ J` and `J(xᵉ) = 0` over every pair, then
/// compares `J` with value iteration.
pub fn dplp_certificate(
    sys: &FiniteSystem,
    criterion: Criterion,
    j: &[f64],
    q: &[Vec<f64>],
    rho: Option<f64>,
    tol: f64,
) -> Result<DplpReport> {
    check_dim("J table", sys.n_states(), j.len())?;
    check_dim("Q table", sys.n_states(), q.len())?;
    let reference = value_iteration(sys, criterion, 0.0, 10 * sys.n_states() + 1000)?;
    let gamma = criterion.gamma;
    let (mut bellman, mut advantage) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut tightened = rho.map(|_| f64::NEG_INFINITY);
    let mut first_violation = None;
    for (x, u) in sys.pairs() {
        check_dim("Q row", sys.n_inputs(), q[x].len())?;
        let (c, jn) = (sys.cost[x][u], j[sys.next[x][u]]);
        let b = q[x][u] - c - gamma * jn;
        let a = j[x] - q[x][u];
        bellman = bellman.max(b);
        advantage = advantage.max(a);
        if let (Some(t), Some(r)) = (tightened.as_mut(), rho) {
            *t = t.max((1.0 - r) * c + gamma * jn - q[x][u]);
        }
        if first_violation.is_none() && (b > tol || a > tol) {
            first_violation = Some((x, u));
        }
    }
    let equilibrium = j[sys.equilibrium.0].abs();
    let diff: Vec<f64> = j.iter().zip(&reference.j).map(|(a, b)| a - b).collect();
    let dominance = diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = diff.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let feasible = bellman <= tol && advantage <= tol && equilibrium <= tol && tightened.map_or(true, |t| t <= tol);
    Ok(DplpReport {
        bellman,
        advantage,
        equilibrium,
        tightened,
        dominance,
        gap,
        first_violation,
        feasible,
        optimal: feasible && gap <= tol,
    })
}
