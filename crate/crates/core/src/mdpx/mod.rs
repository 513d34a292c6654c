//! Average-cost MDPs.
//!
//! The normalized Q equation
//!
//! ```text
//!   Q°(x,u) = c(x,u) + P_u Q̲°(x) − δ⟨ν, Q°⟩
//! ```
//!
//! has a unique solution with `δ⟨ν, Q°⟩ = η°`, the optimal average cost, and
//! `h° = Q̲°` is a relative value function.

mod bcql;
mod condexp;
mod noisy;

pub use bcql::{mdp_td_rows, run_bcql_mdp};
pub use condexp::{sample_chain, CondExp, CondExpMode, GalerkinFit, Transition};
pub use noisy::{noisy_loss_decomposition, NoisyLoss};

use crate::env::FiniteSystem;
use crate::error::{check_dim, Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// `δ⟨ν, Q⟩` with `ν` a pmf over state-input pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// `((x, u), mass)`
    pub nu: Vec<((usize, usize), f64)>,
    pub delta: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            nu: vec![((0, 0), 1.0)],
            delta: 1.0,
        }
    }
}

impl Normalization {
    pub fn apply(&self, q: &[Vec<f64>]) -> f64 {
        self.delta * self.nu.iter().map(|&((x, u), w)| w * q[x][u]).sum::<f64>()
    }
}

/// Finite MDP with controlled transition matrices `p[u][x][x′]` and costs `cost[x][u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mdp {
    pub p: Vec<Vec<Vec<f64>>>,
    pub cost: Vec<Vec<f64>>,
    #[serde(default)]
    pub norm: Normalization,
}

impl Mdp {
    /// `ν` is a Dirac mass at `(0, 0)` and `δ = 1`.
    pub fn new(p: Vec<Vec<Vec<f64>>>, cost: Vec<Vec<f64>>) -> Result<Self> {
        let m = Mdp {
            p,
            cost,
            norm: Normalization::default(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_norm(mut self, norm: Normalization) -> Result<Self> {
        self.norm = norm;
        self.validate()?;
        Ok(self)
    }

    /// Transition matrices `P_u(x, ·) = 1{F(x,u)}`.
    pub fn from_deterministic(sys: &FiniteSystem) -> Result<Self> {
        Mdp::from_next_table(&sys.next, sys.cost.clone())
    }

    /// Deterministic MDP with successor table `next[x][u]`.
    pub fn from_next_table(next: &[Vec<usize>], cost: Vec<Vec<f64>>) -> Result<Self> {
        let n = next.len();
        let m = next.first().map_or(0, |r| r.len());
        if next.iter().any(|r| r.len() != m || r.iter().any(|y| *y >= n)) {
            return Err(Error::InvalidParameter("successor table is ragged or out of range".into()));
        }
        let p = (0..m)
            .map(|u| {
                (0..n)
                    .map(|x| {
                        let mut row = vec![0.0; n];
                        row[next[x][u]] = 1.0;
                        row
                    })
                    .collect()
            })
            .collect();
        Mdp::new(p, cost)
    }

    pub fn n_states(&self) -> usize {
        self.cost.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        let m = self.n_inputs();
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter("MDP needs at least one state and input".into()));
        }
        for (x, row) in self.cost.iter().enumerate() {
            check_dim("MDP cost row", m, row.len())?;
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite cost at state {x}")));
            }
        }
        for (u, pu) in self.p.iter().enumerate() {
            check_dim("MDP transition rows", n, pu.len())?;
            for (x, row) in pu.iter().enumerate() {
                check_dim("MDP transition cols", n, row.len())?;
                let s: f64 = row.iter().sum();
                if row.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "P_{u}({x}, ·) is not a pmf (sum {s})"
                    )));
                }
            }
        }
        if !(self.norm.delta > 0.0) {
            return Err(Error::InvalidParameter("δ must be positive".into()));
        }
        let mass: f64 = self.norm.nu.iter().map(|(_, w)| *w).sum();
        if self.norm.nu.iter().any(|((x, u), w)| *x >= n || *u >= m || !(*w >= 0.0)) || (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("ν is not a pmf on X × U".into()));
        }
        Ok(())
    }

    /// `P_u h (x)`
    pub fn expect(&self, h: &[f64], x: usize, u: usize) -> f64 {
        self.p[u][x].iter().zip(h).map(|(p, v)| p * v).sum()
    }

    /// Right-hand side of the normalized Q equation.
    pub fn q_operator(&self, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h = min_rows(q);
        let shift = self.norm.apply(q);
        (0..self.n_states())
            .map(|x| {
                (0..self.n_inputs())
                    .map(|u| self.cost[x][u] + self.expect(&h, x, u) - shift)
                    .collect()
            })
            .collect()
    }

    /// `max |Q − c − P_uQ̲ + δ⟨ν,Q⟩|`
    pub fn q_residual(&self, q: &[Vec<f64>]) -> f64 {
        let t = self.q_operator(q);
        sup_diff(q, &t)
    }

    /// Some state can be reached from every state (under some policy).
    pub fn is_unichain(&self) -> bool {
        let n = self.n_states();
        // reach[y] = states that can reach y
        (0..n).any(|target| {
            let mut seen = vec![false; n];
            seen[target] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for x in 0..n {
                    if seen[x] {
                        continue;
                    }
                    if self.p.iter().any(|pu| pu[x].iter().enumerate().any(|(y, v)| *v > 0.0 && seen[y])) {
                        seen[x] = true;
                        changed = true;
                    }
                }
            }
            seen.iter().all(|s| *s)
        })
    }

    /// `P_φ(x, x′) = Σ_u φ(u | x) P_u(x, x′)` for a randomized policy table `φ[x][u]`.
    pub fn policy_matrix(&self, policy: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let n = self.n_states();
        check_policy(policy, n, self.n_inputs())?;
        Ok(DMatrix::from_fn(n, n, |x, y| {
            (0..self.n_inputs()).map(|u| policy[x][u] * self.p[u][x][y]).sum()
        }))
    }
}

pub(crate) fn check_policy(policy: &[Vec<f64>], n: usize, m: usize) -> Result<()> {
    check_dim("policy rows", n, policy.len())?;
    for (x, row) in policy.iter().enumerate() {
        check_dim("policy cols", m, row.len())?;
        let s: f64 = row.iter().sum();
        if row.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("policy row {x} is not a pmf")));
        }
    }
    Ok(())
}

fn min_rows(q: &[Vec<f64>]) -> Vec<f64> {
    q.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect()
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Output of [`avg_cost_q_oracle`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvgCostSolution {
    pub q: Vec<Vec<f64>>,
    /// `h°(x) = min_u Q°(x, u)`
    pub h: Vec<f64>,
    /// `δ⟨ν, Q°⟩`
    pub eta: f64,
    /// Greedy inputs, ties to the lowest index.
    pub policy: Vec<usize>,
    pub residual: f64,
    pub iterations: usize,
}

/// Damped fixed-point iteration `Q ← (1−τ)Q + τ T(Q)` with `τ = ½`, from `Q = 0`.
pub fn avg_cost_q_oracle(mdp: &Mdp, tol: f64, max_iter: usize) -> Result<AvgCostSolution> {
    mdp.validate()?;
    if !mdp.is_unichain() {
        return Err(Error::InvalidParameter(
            "no state is reachable from every state; the average cost may depend on the start".into(),
        ));
    }
    let tau = 0.5;
    let (n, m) = (mdp.n_states(), mdp.n_inputs());
    let mut q = vec![vec![0.0; m]; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let t = mdp.q_operator(&q);
        residual = sup_diff(&q, &t);
        if residual <= tol {
            return Ok(finish(mdp, q, it));
        }
        for x in 0..n {
            for u in 0..m {
                q[x][u] += tau * (t[x][u] - q[x][u]);
            }
        }
    }
    Err(Error::NonConvergence {
        what: "average-cost Q iteration",
        iterations: max_iter,
        residual,
    })
}

fn finish(mdp: &Mdp, q: Vec<Vec<f64>>, iterations: usize) -> AvgCostSolution {
    let h = min_rows(&q);
    let policy = q
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::INFINITY), |b, (i, v)| if *v < b.1 { (i, *v) } else { b })
                .0
        })
        .collect();
    let eta = mdp.norm.apply(&q);
    let residual = mdp.q_residual(&q);
    AvgCostSolution {
        q,
        h,
        eta,
        policy,
        residual,
        iterations,
    }
}

/// Cesàro limit `lim (1/n) Σ Pᵏ`, computed as the limit of the lazy chain
/// `((I + P)/2)ᵏ` by repeated squaring.
pub fn cesaro_limit(p: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    let mut l = (DMatrix::identity(n, n) + p) * 0.5;
    for _ in 0..64 {
        let next = &l * &l;
        let change = (&next - &l).amax();
        l = next;
        if change <= tol {
            return Ok(l);
        }
    }
    Err(Error::NonConvergence {
        what: "stationary power iteration",
        iterations: 64,
        residual: (&l * &l - &l).amax(),
    })
}

/// Unique stationary pmf of `p`; an error when the chain has several recurrent classes.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let lim = cesaro_limit(p, 1e-12)?;
    let first = lim.row(0).transpose();
    for r in 1..lim.nrows() {
        if (lim.row(r).transpose() - &first).amax() > 1e-9 {
            return Err(Error::InvalidParameter(
                "chain is not ergodic: the stationary law depends on the start".into(),
            ));
        }
    }
    Ok(first)
}

/// Average cost of each deterministic stationary policy, minimized per start
/// state. Errors when there are more than `max_policies` policies.
pub fn policy_enumeration(mdp: &Mdp, max_policies: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    mdp.validate()?;
    let (n, m) = (mdp.n_states(), mdp.n_inputs());
    let count = (m as f64).powi(n as i32);
    if count > max_policies as f64 {
        return Err(Error::InvalidParameter(format!("{count} policies exceed the cap {max_policies}")));
    }
    let mut best = vec![f64::INFINITY; n];
    let mut best_policy = vec![0; n];
    let mut phi = vec![0usize; n];
    loop {
        let table: Vec<Vec<f64>> = phi
            .iter()
            .map(|&u| (0..m).map(|v| if v == u { 1.0 } else { 0.0 }).collect())
            .collect();
        let pm = mdp.policy_matrix(&table)?;
        let c = DVector::from_fn(n, |x, _| mdp.cost[x][phi[x]]);
        let eta = cesaro_limit(&pm, 1e-13)? * c;
        for x in 0..n {
            if eta[x] < best[x] - 1e-12 {
                best[x] = eta[x];
                if x == 0 {
                    best_policy = phi.clone();
                }
            }
        }
        // next policy in mixed radix
        let mut k = 0;
        loop {
            if k == n {
                return Ok((best, best_policy));
            }
            phi[k] += 1;
            if phi[k] < m {
                break;
            }
            phi[k] = 0;
            k += 1;
        }
    }
}
