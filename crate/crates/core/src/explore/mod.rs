//! Quasi-stochastic exploration: deterministic probe signals, exploration
//! policies, rollouts, and time averages along trajectories.

mod policy;
mod probe;
mod trajectory;

pub use policy::{Constant, EpsilonGreedy, ExplorationPolicy, LinearFeedback, ProbeIndexed, Relay};
pub use probe::{ProbeSignal, ProbeState, Sine};
pub use trajectory::Trajectory;

use crate::env::{ControlSystem, FiniteSystem};
use crate::error::{Error, Result};

/// Runs `N` steps of `u(k) = φ(x(k), ξ(k))` from `x0`.
pub fn rollout<S, P>(sys: &S, policy: &P, probe: &ProbeSignal, x0: &[f64], n: usize) -> Result<Trajectory>
where
    S: ControlSystem + ?Sized,
    P: ExplorationPolicy + ?Sized,
{
    rollout_with_restarts(sys, policy, probe, &[x0.to_vec()], n, |_| false)
}

/// Like [`rollout`], but whenever `restart(x(k+1))` holds (or the equilibrium
/// is reached) the next state is replaced by the next entry of `starts`,
/// cycling through the list.
pub fn rollout_with_restarts<S, P, R>(
    sys: &S,
    policy: &P,
    probe: &ProbeSignal,
    starts: &[Vec<f64>],
    n: usize,
    restart: R,
) -> Result<Trajectory>
where
    S: ControlSystem + ?Sized,
    P: ExplorationPolicy + ?Sized,
    R: Fn(&[f64]) -> bool,
{
    if n == 0 {
        return Err(Error::InvalidParameter("rollout length must be at least 1".into()));
    }
    if starts.is_empty() {
        return Err(Error::InvalidParameter("no initial state".into()));
    }
    let xe = sys.equilibrium().0;
    let multi = starts.len() > 1;
    let mut next_start = 1 % starts.len();
    let mut traj = Trajectory::default();
    let mut xi = probe.start();
    let mut x = starts[0].clone();
    for k in 0..n {
        let admissible = sys.inputs(&x);
        let u = policy.input(&x, &xi.current(), k, &admissible);
        let y = sys.step(&x, &u).map_err(|e| Error::RolloutAborted {
            step: k,
            source: Box::new(e),
        })?;
        let c = sys.cost(&x, &u);
        traj.push(x, u, c, y.clone());
        xi.advance();
        x = if restart(&y) || (multi && y == xe) {
            let s = starts[next_start].clone();
            next_start = (next_start + 1) % starts.len();
            s
        } else {
            y
        };
    }
    Ok(traj)
}

/// One tuple for every state-input pair of a finite system, in row-major order.
pub fn exhaustive_pairs(sys: &FiniteSystem) -> Trajectory {
    let mut traj = Trajectory::default();
    for (x, u) in sys.pairs() {
        let xs = FiniteSystem::state(x);
        let us = FiniteSystem::state(u);
        let y = sys.dynamics(&xs, &us);
        traj.push(xs.clone(), us.clone(), sys.cost(&xs, &us), y);
    }
    traj
}

/// `(1/N) Σ g(x(k), u(k), x(k+1))`.
pub fn ergodic_average<G>(traj: &Trajectory, g: G) -> Result<Vec<f64>>
where
    G: Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
{
    if traj.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let mut acc: Vec<f64> = Vec::new();
    for k in 0..traj.len() {
        let v = g(&traj.states[k], &traj.inputs[k], &traj.next[k]);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
    let n = traj.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}
