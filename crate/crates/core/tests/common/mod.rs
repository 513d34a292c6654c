#![allow(dead_code)]

use cvxq::approx::FnBasis;
use cvxq::env::FiniteSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random finite system in which input 0 always moves to a lower-indexed
/// state, so every state reaches the equilibrium `(0, 0)`.
pub fn random_system(n: usize, m: usize, seed: u64) -> FiniteSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = vec![vec![0; m]; n];
    let mut cost = vec![vec![0.0; m]; n];
    for x in 0..n {
        for u in 0..m {
            next[x][u] = if x == 0 && u == 0 {
                0
            } else if u == 0 {
                rng.gen_range(0..x)
            } else {
                rng.gen_range(0..n)
            };
            cost[x][u] = if x == 0 && u == 0 { 0.0 } else { rng.gen_range(0.5..2.0) };
        }
    }
    FiniteSystem::new(next, cost, (0, 0)).expect("valid random system")
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn sup_dist_table(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| sup_dist(x, y)).fold(0.0, f64::max)
}

/// `J(x) = a₁t + a₂t²` and `Q(x,u) = b_u + c_u t` with `t = x/(n−1)`.
pub fn coarse_basis(n: usize, m: usize) -> FnBasis {
    let d = 2 + 2 * m;
    let s = 1.0 / (n - 1) as f64;
    FnBasis::new(
        "coarse",
        d,
        move |x: &[f64]| {
            let t = x[0] * s;
            let mut v = vec![0.0; d];
            v[0] = t;
            v[1] = t * t;
            v
        },
        move |x: &[f64], u: &[f64]| {
            let t = x[0] * s;
            let i = u[0] as usize;
            let mut v = vec![0.0; d];
            v[2 + 2 * i] = 1.0;
            v[3 + 2 * i] = t;
            v
        },
    )
}
