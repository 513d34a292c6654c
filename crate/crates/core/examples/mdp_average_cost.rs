//! Average-cost BCQL on a small MDP, with the conditional expectation taken
//! from the model or estimated from the sampled transitions.

use cvxq::algos::{AlgoConfig, Algorithm, ConstraintMode, StepSchedule};
use cvxq::approx::{Tabular, TabularForm};
use cvxq::env::FiniteSystem;
use cvxq::losses::{MuMeasure, ZetaSpec};
use cvxq::mdpx::{avg_cost_q_oracle, policy_enumeration, run_bcql_mdp, sample_chain, CondExp, Mdp};

fn main() -> cvxq::Result<()> {
    // Input 0 cycles 0 → 1 → 2 → 0; input 1 stays put with probability 1 − slip.
    for slip in [0.0, 0.2] {
        let p = vec![
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]],
            vec![
                vec![1.0 - slip, slip, 0.0],
                vec![0.0, 1.0 - slip, slip],
                vec![slip, 0.0, 1.0 - slip],
            ],
        ];
        let cost = vec![vec![1.0, 4.0], vec![2.0, 3.0], vec![0.0, 3.0]];
        println!("slip = {slip}");
        solve(&Mdp::new(p, cost)?)?;
    }
    Ok(())
}

fn solve(m: &Mdp) -> cvxq::Result<()> {
    let oracle = avg_cost_q_oracle(m, 1e-13, 100_000)?;
    let (eta_enum, best) = policy_enumeration(m, 64)?;
    println!("oracle η° = {:.6}, policy {:?}", oracle.eta, oracle.policy);
    println!("enumeration η per start = {eta_enum:.6?}, policy {best:?}");

    let uniform = vec![vec![0.5, 0.5]; 3];
    let samples = sample_chain(m, &uniform, 0, 2000, 11)?;

    let arch = Tabular::unpinned(3, 2, TabularForm::Advantage);
    let mut cfg = AlgoConfig::new(Algorithm::Bcql);
    cfg.mode = ConstraintMode::AdvantageCone;
    cfg.mu = MuMeasure::uniform(&(0..3).map(FiniteSystem::state).collect::<Vec<_>>());
    cfg.zeta = ZetaSpec::PerPair;
    cfg.kappa_plus = 0.0;
    cfg.batches = 1;
    cfg.epochs = Some(200);
    cfg.step = StepSchedule::Constant { alpha: 100.0 };

    let mut empirical = CondExp::empirical(3, 2);
    empirical.extend(&samples)?;
    for (name, est) in [("model", CondExp::direct(m)), ("empirical", empirical)] {
        let out = run_bcql_mdp(&samples, 2, &arch, &est, &m.norm, &cfg)?;
        let (h, q) = arch.decode(&out.theta);
        let gap = q
            .iter()
            .flatten()
            .zip(oracle.q.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!(
            "{name:>9}: η = {:.6}, h = {h:.4?}, sup |Q − Q°| = {gap:.2e}",
            m.norm.apply(&q)
        );
    }
    Ok(())
}
