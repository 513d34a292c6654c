use super::{check_policy, stationary_distribution, Mdp};
use crate::approx::Architecture;
use crate::env::FiniteSystem;
use crate::error::{check_dim, Result};

/// Steady-state losses under a stationary policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyLoss {
    /// Loss with the conditional expectation `h_{k+1|k}`.
    pub be: f64,
    /// Loss with the sampled `h(X(k+1))`.
    pub be_var: f64,
    /// `E[(h(X(k+1)) − h_{k+1|k})²]`
    pub sigma2: f64,
    /// `be_var − be − σ²`
    pub gap: f64,
}

/// Exact steady-state means of both losses at `θ`, under the stationary law of
/// the randomized policy `policy[x][u]`.
pub fn noisy_loss_decomposition<A: Architecture + ?Sized>(
    mdp: &Mdp,
    policy: &[Vec<f64>],
    theta: &[f64],
    arch: &A,
) -> Result<NoisyLoss> {
    mdp.validate()?;
    check_dim("theta", arch.dim(), theta.len())?;
    let (n, m) = (mdp.n_states(), mdp.n_inputs());
    check_policy(policy, n, m)?;
    let varpi = stationary_distribution(&mdp.policy_matrix(policy)?)?;
    let h: Vec<f64> = (0..n).map(|x| arch.psi_j(&FiniteSystem::state(x)).dot(theta)).collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|x| {
            (0..m)
                .map(|u| arch.psi(&FiniteSystem::state(x), &FiniteSystem::state(u)).dot(theta))
                .collect()
        })
        .collect();
    let shift = mdp.norm.apply(&q);
    let (mut be, mut be_var, mut sigma2) = (0.0, 0.0, 0.0);
    for x in 0..n {
        for u in 0..m {
            let w = varpi[x] * policy[x][u];
            if w == 0.0 {
                continue;
            }
            let hk = mdp.expect(&h, x, u);
            let td = -q[x][u] - shift + mdp.cost[x][u] + hk;
            be += w * td * td;
            for (y, p) in mdp.p[u][x].iter().enumerate() {
                let noise = h[y] - hk;
                be_var += w * p * (td + noise) * (td + noise);
                sigma2 += w * p * noise * noise;
            }
        }
    }
    Ok(NoisyLoss {
        be,
        be_var,
        sigma2,
        gap: be_var - be - sigma2,
    })
}
