//! LP and convex Q-learning on a small finite system, checked against value iteration.

use cvxq::algos::{run_cql, run_lpql, AlgoConfig, Algorithm, ConstraintMode};
use cvxq::approx::{Tabular, TabularForm};
use cvxq::env::{Criterion, FiniteSystem};
use cvxq::explore::exhaustive_pairs;
use cvxq::losses::{MuMeasure, ZetaSpec};
use cvxq::oracles::{dplp_certificate, value_iteration};

fn main() -> cvxq::Result<()> {
    // Five states; input 0 walks toward 0, input 1 jumps ahead at a different cost.
    let sys = FiniteSystem::new(
        vec![vec![0, 0], vec![0, 3], vec![1, 4], vec![2, 0], vec![3, 1]],
        vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![1.0, 2.0], vec![1.0, 3.5], vec![1.0, 1.0]],
        (0, 0),
    )?;
    let states: Vec<Vec<f64>> = (0..sys.n_states()).map(FiniteSystem::state).collect();
    let data = exhaustive_pairs(&sys);
    let vi = value_iteration(&sys, Criterion::total_cost(), 1e-14, 10_000)?;

    let plain = Tabular::new(&sys, TabularForm::Plain);
    let mut lp = AlgoConfig::new(Algorithm::Lpql);
    lp.mu = MuMeasure::uniform(&states);
    lp.zeta = ZetaSpec::PerPair;
    lp.zeta_plus = ZetaSpec::PerPair;
    let out = run_lpql(&sys, &data, &plain, &lp)?;
    let (j_lp, q_lp) = plain.decode(&out.theta);

    let adv = Tabular::new(&sys, TabularForm::Advantage);
    let mut cql = AlgoConfig::new(Algorithm::Cql);
    cql.mu = MuMeasure::uniform(&states);
    cql.zeta = ZetaSpec::PerPair;
    cql.mode = ConstraintMode::AdvantageCone;
    cql.kappa_plus = 0.0;
    let out = run_cql(&sys, &data, &adv, &cql)?;
    let (j_cql, q_cql) = adv.decode(&out.theta);

    println!("state  J°        LPQL      CQL");
    for x in 0..sys.n_states() {
        println!("{x:>5}  {:<8.5}  {:<8.5}  {:<8.5}", vi.j[x], j_lp[x], j_cql[x]);
    }
    for (name, j, q) in [("LPQL", &j_lp, &q_lp), ("CQL", &j_cql, &q_cql)] {
        let cert = dplp_certificate(&sys, Criterion::total_cost(), j, q, None, 1e-6)?;
        println!("{name}: feasible {}, optimal {}, gap {:.2e}", cert.feasible, cert.optimal, cert.gap);
    }
    Ok(())
}
