//! Primal-dual batch convex Q-learning: parameters and multipliers on a chain.

use cvxq::algos::{run_pd_bcql, AlgoConfig, Algorithm, ConstraintMode, StepSchedule};
use cvxq::approx::{Tabular, TabularForm};
use cvxq::env::{Criterion, FiniteSystem};
use cvxq::explore::exhaustive_pairs;
use cvxq::losses::{MuMeasure, ZetaSpec};
use cvxq::oracles::value_iteration;

fn main() -> cvxq::Result<()> {
    let sys = FiniteSystem::new(
        vec![vec![0, 0], vec![0, 2], vec![1, 3], vec![2, 0]],
        vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![1.0, 1.5], vec![1.0, 5.0]],
        (0, 0),
    )?;
    let arch = Tabular::new(&sys, TabularForm::Advantage);
    let mut cfg = AlgoConfig::new(Algorithm::PdBcql);
    cfg.mu = MuMeasure::uniform(&(0..4).map(FiniteSystem::state).collect::<Vec<_>>());
    cfg.zeta = ZetaSpec::PerPair;
    cfg.mode = ConstraintMode::AdvantageCone;
    cfg.kappa_plus = 0.0;
    cfg.batches = 1;
    cfg.epochs = Some(1000);
    // Convergence speed depends on α times the iteration count.
    cfg.step = StepSchedule::Constant { alpha: 10.0 };
    let out = run_pd_bcql(&sys, &exhaustive_pairs(&sys), &arch, &cfg)?;

    let vi = value_iteration(&sys, Criterion::total_cost(), 1e-14, 10_000)?;
    let (j, _) = arch.decode(&out.theta);
    println!("J      = {j:.6?}");
    println!("J°     = {:.6?}", vi.j);
    println!("λ      = {:.4?}", out.lambda.unwrap_or_default());
    for e in out.record.epochs.iter().filter(|e| [1, 10, 100, 1000].contains(&e.epoch)) {
        println!(
            "epoch {:>4}: <mu,J> {:.6}  BE loss {:.3e}  min z {:+.3e}  |λ| {:.3}",
            e.epoch, e.mu_j, e.be_loss, e.z_min, e.lambda_inf
        );
    }
    Ok(())
}
