//! DQN and CQL with the same state-aggregation basis: each limit satisfies
//! its own optimality condition and neither satisfies the other's.

use cvxq::algos::{residual_report, run_cql, run_dqn, AlgoConfig, Algorithm, StepSchedule};
use cvxq::approx::{Architecture, FnBasis};
use cvxq::env::{Criterion, FiniteSystem};
use cvxq::explore::exhaustive_pairs;
use cvxq::losses::{MuMeasure, ZetaSpec};
use cvxq::oracles::value_iteration;

const N: usize = 8;
const M: usize = 2;

/// Groups `{0}, {1,2}, {3,4}, …`; `J` is zero on `{0}`.
fn aggregated() -> FnBasis {
    let groups = 1 + N / 2;
    let group = |x: f64| (x as usize + 1) / 2;
    let d = (groups - 1) + groups * M;
    FnBasis::new(
        "aggregated",
        d,
        move |x: &[f64]| {
            let mut v = vec![0.0; d];
            if group(x[0]) > 0 {
                v[group(x[0]) - 1] = 1.0;
            }
            v
        },
        move |x: &[f64], u: &[f64]| {
            let mut v = vec![0.0; d];
            v[groups - 1 + group(x[0]) * M + u[0] as usize] = 1.0;
            v
        },
    )
}

fn q_table(arch: &FnBasis, theta: &[f64]) -> Vec<Vec<f64>> {
    (0..N)
        .map(|x| {
            (0..M)
                .map(|u| arch.psi(&FiniteSystem::state(x), &FiniteSystem::state(u)).dot(theta))
                .collect()
        })
        .collect()
}

fn main() -> cvxq::Result<()> {
    // Input 0 steps down one state, input 1 jumps down two at a higher price.
    let next = (0..N).map(|x| vec![x.saturating_sub(1), x.saturating_sub(2)]).collect();
    let cost = (0..N)
        .map(|x| if x == 0 { vec![0.0, 0.0] } else { vec![1.0 + 0.1 * x as f64, 1.8] })
        .collect();
    let sys = FiniteSystem::new(next, cost, (0, 0))?;
    let data = exhaustive_pairs(&sys);
    let vi = value_iteration(&sys, Criterion::total_cost(), 1e-14, 10_000)?;
    let arch = aggregated();

    let mut dqn = AlgoConfig::new(Algorithm::Dqn);
    dqn.batches = 1;
    dqn.epochs = Some(500);
    dqn.step = StepSchedule::Off;
    let dqn = run_dqn(&sys, &data, &arch, &dqn)?;

    let mut cql = AlgoConfig::new(Algorithm::Cql);
    cql.mu = MuMeasure::uniform(&(0..N).map(FiniteSystem::state).collect::<Vec<_>>());
    cql.kappa_be = 10.0;
    cql.kappa_plus = 10.0;
    cql.batches = 1;
    let cql = run_cql(&sys, &data, &arch, &cql)?;

    println!("x   Q°(x,·)          DQN              CQL");
    let (qd, qc) = (q_table(&arch, &dqn.theta), q_table(&arch, &cql.theta));
    for x in 0..N {
        println!(
            "{x}   {:>6.3} {:>6.3}    {:>6.3} {:>6.3}    {:>6.3} {:>6.3}",
            vi.q[x][0], vi.q[x][1], qd[x][0], qd[x][1], qc[x][0], qc[x][1]
        );
    }
    for (name, theta) in [("DQN", &dqn.theta), ("CQL", &cql.theta)] {
        let r = residual_report(&sys, &data, &arch, theta, &ZetaSpec::Features, Criterion::total_cost(), 1e6)?;
        println!(
            "{name}: projected Bellman residual {:.2e}, local Lipschitz {:.2}",
            r.norm_inf, r.lipschitz
        );
    }
    Ok(())
}
