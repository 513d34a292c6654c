use crate::env::{Criterion, FiniteSystem};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Optimal value, Q-function and greedy policy of a finite system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSolution {
    pub j: Vec<f64>,
    /// `q[x][u] = c(x,u) + γ J(F(x,u))`
    pub q: Vec<Vec<f64>>,
    /// Greedy input per state, ties to the lowest index.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Final sup-norm Bellman residual.
    pub residual: f64,
}

impl ValueSolution {
    /// `J°(xᵉ) = 0` and `max |J − min_u Q|`.
    pub fn bellman_residual(&self, sys: &FiniteSystem, criterion: Criterion) -> f64 {
        let mut r: f64 = 0.0;
        for x in 0..sys.n_states() {
            let best = (0..sys.n_inputs())
                .map(|u| sys.cost[x][u] + criterion.gamma * self.j[sys.next[x][u]])
                .fold(f64::INFINITY, f64::min);
            r = r.max((self.j[x] - best).abs());
        }
        r
    }
}

fn q_table(sys: &FiniteSystem, j: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    (0..sys.n_states())
        .map(|x| {
            (0..sys.n_inputs())
                .map(|u| sys.cost[x][u] + gamma * j[sys.next[x][u]])
                .collect()
        })
        .collect()
}

fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v < row[best] {
            best = i;
        }
    }
    best
}

/// Value iteration `J ← min_u {c + γ J∘F}` from `J ≡ 0`.
///
/// Costs are non-negative, so the iterates increase monotonically to the
/// smallest fixed point. Under total cost a state that cannot reach a zero-cost
/// cycle makes them grow without bound; that is reported as divergence once
/// any value exceeds `n · max c`, which bounds every finite optimal cost.
pub fn value_iteration(sys: &FiniteSystem, criterion: Criterion, tol: f64, max_iter: usize) -> Result<ValueSolution> {
    sys.validate()?;
    let gamma = criterion.gamma;
    let n = sys.n_states();
    let cmax = sys.cost.iter().flatten().fold(0.0_f64, |a, c| a.max(*c));
    let bound = if gamma < 1.0 {
        cmax / (1.0 - gamma) + 1.0
    } else {
        n as f64 * cmax + 1.0
    };
    let mut j = vec![0.0; n];
    for it in 1..=max_iter {
        let q = q_table(sys, &j, gamma);
        let next: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).collect();
        let delta = next.iter().zip(&j).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        j = next;
        if let Some(x) = j.iter().position(|v| *v > bound) {
            return Err(Error::NonConvergence {
                what: "value iteration (goal unreachable from some state)",
                iterations: it,
                residual: j[x],
            });
        }
        if delta <= tol {
            let q = q_table(sys, &j, gamma);
            let policy = q.iter().map(|row| argmin(row)).collect();
            return Ok(ValueSolution {
                j,
                q,
                policy,
                iterations: it,
                residual: delta,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "value iteration",
        iterations: max_iter,
        residual: f64::NAN,
    })
}
