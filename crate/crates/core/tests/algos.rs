mod common;

use common::{coarse_basis, random_system, sup_dist};
use cvxq::algos::{
    projected_bellman_residual, residual_report, run, run_bcql, run_cql, run_dqn, run_lpql, run_pd_bcql, run_zap,
    AlgoConfig, Algorithm, ConstraintMode, StepSchedule,
};
use cvxq::approx::{Architecture, QuadBasis, Tabular, TabularForm};
use cvxq::env::{Criterion, FiniteSystem, LqrSystem};
use cvxq::explore::{exhaustive_pairs, rollout, LinearFeedback, ProbeSignal, Trajectory};
use cvxq::losses::{assemble_batch, LossSpec, MuMeasure, ZetaSpec};
use cvxq::oracles::value_iteration;
use nalgebra::{DMatrix, DVector};

fn all_states(sys: &FiniteSystem) -> Vec<Vec<f64>> {
    (0..sys.n_states()).map(FiniteSystem::state).collect()
}

fn repeated(base: &Trajectory, times: usize) -> Trajectory {
    let mut t = Trajectory::default();
    for _ in 0..times {
        t.extend(base);
    }
    t
}

#[test]
fn lpql_recovers_tabular_value() {
    for seed in [1, 2, 3] {
        let sys = random_system(10, 3, seed);
        let sol = value_iteration(&sys, Criterion::total_cost(), 1e-14, 100_000).unwrap();
        let tab = Tabular::new(&sys, TabularForm::Plain);
        let mut cfg = AlgoConfig::new(Algorithm::Lpql);
        cfg.mu = MuMeasure::uniform(&all_states(&sys));
        cfg.zeta = ZetaSpec::PerPair;
        cfg.zeta_plus = ZetaSpec::PerPair;
        let out = run_lpql(&sys, &exhaustive_pairs(&sys), &tab, &cfg).unwrap();
        let (j, q) = tab.decode(&out.theta);
        assert!(sup_dist(&j, &sol.j) < 1e-6, "seed {seed}");
        for x in 0..10 {
            assert!(sup_dist(&q[x], &sol.q[x]) < 1e-6);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let sys = random_system(12, 3, 4);
    let arch = coarse_basis(12, 3);
    let traj = repeated(&exhaustive_pairs(&sys), 3);
    for algo in [Algorithm::Bcql, Algorithm::Zap, Algorithm::Dqn] {
        let mut cfg = AlgoConfig::new(algo);
        cfg.mu = MuMeasure::uniform(&all_states(&sys));
        cfg.batches = 3;
        cfg.epochs = Some(12);
        let a = run(&sys, &traj, &arch, &cfg).unwrap();
        let b = run(&sys, &traj, &arch, &cfg).unwrap();
        assert!(a.record.same_numbers(&b.record), "{algo:?}");
        assert_eq!(a.theta, b.theta);
    }
}

#[test]
fn bcql_without_prox_matches_cql() {
    let sys = random_system(12, 3, 6);
    let arch = coarse_basis(12, 3);
    let traj = exhaustive_pairs(&sys);
    let mut cfg = AlgoConfig::new(Algorithm::Cql);
    cfg.mu = MuMeasure::uniform(&all_states(&sys));
    cfg.kappa_be = 10.0;
    cfg.kappa_plus = 5.0;
    cfg.batches = 1;
    let cql = run_cql(&sys, &traj, &arch, &cfg).unwrap();
    cfg.step = StepSchedule::Off;
    cfg.epochs = Some(1);
    let off = run_bcql(&sys, &traj, &arch, &cfg).unwrap();
    assert!(sup_dist(&cql.theta, &off.theta) < 1e-6);
    // A huge constant step leaves a negligible proximal term.
    cfg.step = StepSchedule::Constant { alpha: 1e9 };
    let big = run_bcql(&sys, &traj, &arch, &cfg).unwrap();
    assert!(sup_dist(&cql.theta, &big.theta) < 1e-5);
}

#[test]
fn bcql_epochs_decrease_the_objective() {
    let sys = random_system(12, 3, 7);
    let arch = coarse_basis(12, 3);
    let traj = exhaustive_pairs(&sys);
    let mut cfg = AlgoConfig::new(Algorithm::Bcql);
    cfg.mu = MuMeasure::uniform(&all_states(&sys));
    cfg.kappa_be = 10.0;
    cfg.kappa_plus = 0.0;
    cfg.batches = 1;
    cfg.epochs = Some(30);
    cfg.step = StepSchedule::Constant { alpha: 0.05 };
    let out = run_bcql(&sys, &traj, &arch, &cfg).unwrap();
    let spec = LossSpec {
        criterion: Criterion::total_cost(),
        mu: cfg.mu.clone(),
        plus_variant: Default::default(),
        with_plus: false,
        zeta: ZetaSpec::Zero.resolve(&traj),
        zeta_plus: ZetaSpec::Zero.resolve(&traj),
    };
    let data = assemble_batch(&arch, &sys, &traj, 0..traj.len(), &spec).unwrap();
    let f = |t: &DVector<f64>| -data.mu_value(t) + cfg.kappa_be * data.be_loss(t);
    for pair in out.record.thetas.windows(2) {
        let (a, b) = (DVector::from_column_slice(&pair[0]), DVector::from_column_slice(&pair[1]));
        let prox = (&b - &a).norm_squared() / (2.0 * 0.05);
        assert!(f(&b) + prox <= f(&a) + 1e-7 * f(&a).abs().max(1.0), "{} + {prox} > {}", f(&b), f(&a));
    }
}

#[test]
fn zap_and_bcql_reach_the_pooled_optimum() {
    let sys = random_system(10, 3, 8);
    let arch = coarse_basis(10, 3);
    let base = exhaustive_pairs(&sys);
    let traj = repeated(&base, 4);
    let mut cfg = AlgoConfig::new(Algorithm::Bcql);
    cfg.mu = MuMeasure::uniform(&all_states(&sys));
    cfg.kappa_be = 1000.0;
    cfg.kappa_plus = 0.0;
    cfg.batches = 4;
    cfg.epochs = Some(400);
    cfg.keep_history = false;
    let d = arch.dim();
    let (mut p, mut q) = (DMatrix::zeros(d, d), DVector::zeros(d));
    for k in 0..base.len() {
        let ups = arch.psi(&base.states[k], &base.inputs[k]).to_dense() - arch.psi_j(&base.next[k]).to_dense();
        p += &ups * ups.transpose() / base.len() as f64;
        q -= ups * (base.costs[k] / base.len() as f64);
    }
    let target = p.cholesky().unwrap().solve(&(cfg.mu.vector(&arch) / (2.0 * cfg.kappa_be) - q));
    let bcql = run_bcql(&sys, &traj, &arch, &cfg).unwrap();
    // The Zap gain matches the loss Hessian, so αₙ is a Newton step fraction.
    cfg.step = StepSchedule::Harmonic { alpha1: 1000.0 };
    let zap = run_zap(&sys, &traj, &arch, &cfg).unwrap();
    let eb = (DVector::from_column_slice(&bcql.theta) - &target).norm();
    let ez = (DVector::from_column_slice(&zap.theta) - &target).norm();
    assert!(eb < 1e-4 && ez < 1e-4, "bcql {eb:e}, zap {ez:e}");
}

fn chain() -> FiniteSystem {
    FiniteSystem::new(
        vec![vec![0, 0], vec![0, 2], vec![1, 3], vec![2, 0]],
        vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![1.0, 1.5], vec![1.0, 5.0]],
        (0, 0),
    )
    .unwrap()
}

fn pd_config(sys: &FiniteSystem) -> AlgoConfig {
    let mut cfg = AlgoConfig::new(Algorithm::PdBcql);
    cfg.mu = MuMeasure::uniform(&all_states(sys));
    cfg.zeta = ZetaSpec::PerPair;
    cfg.mode = ConstraintMode::AdvantageCone;
    cfg.kappa_be = 1.0;
    cfg.kappa_plus = 0.0;
    cfg.batches = 1;
    cfg.epochs = Some(1000);
    cfg.step = StepSchedule::Constant { alpha: 10.0 };
    cfg
}

#[test]
fn pd_bcql_solves_the_chain_with_complementary_slackness() {
    let sys = chain();
    let sol = value_iteration(&sys, Criterion::total_cost(), 1e-14, 10_000).unwrap();
    let tab = Tabular::new(&sys, TabularForm::Advantage);
    let traj = exhaustive_pairs(&sys);
    let cfg = pd_config(&sys);
    let out = run_pd_bcql(&sys, &traj, &tab, &cfg).unwrap();
    let (j, _) = tab.decode(&out.theta);
    assert!(sup_dist(&j, &sol.j) < 1e-6, "{j:?} vs {:?}", sol.j);
    let lambda = out.lambda.unwrap();
    let spec = LossSpec {
        criterion: Criterion::total_cost(),
        mu: cfg.mu.clone(),
        plus_variant: Default::default(),
        with_plus: false,
        zeta: ZetaSpec::PerPair.resolve(&traj),
        zeta_plus: ZetaSpec::Zero.resolve(&traj),
    };
    let data = assemble_batch(&tab, &sys, &traj, 0..traj.len(), &spec).unwrap();
    let z = data.z(&DVector::from_column_slice(&out.theta));
    for (row, id) in data.zeta_ids.iter().enumerate() {
        assert!(lambda[*id] >= 0.0 && lambda[*id] <= cfg.lambda_max);
        assert!(z[row] >= -1e-6);
        assert!((lambda[*id] * z[row]).abs() < 1e-6);
    }
}

#[test]
fn pd_bcql_with_zero_multiplier_cap() {
    let sys = chain();
    let tab = Tabular::new(&sys, TabularForm::Advantage);
    let mut cfg = pd_config(&sys);
    cfg.lambda_max = 0.0;
    cfg.epochs = Some(50);
    let out = run_pd_bcql(&sys, &exhaustive_pairs(&sys), &tab, &cfg).unwrap();
    assert!(out.record.lambdas.iter().all(|l| l.iter().all(|v| *v == 0.0)));
    assert!(out.record.epochs.iter().all(|e| e.lambda_inf == 0.0));
    cfg.step = StepSchedule::Off;
    assert!(run_pd_bcql(&sys, &exhaustive_pairs(&sys), &tab, &cfg).is_err());
}

#[test]
fn invalid_configurations_are_rejected() {
    let sys = chain();
    let tab = Tabular::new(&sys, TabularForm::Advantage);
    let traj = exhaustive_pairs(&sys);
    let mut cfg = pd_config(&sys);
    cfg.kappa_be = -1.0;
    assert!(run(&sys, &traj, &tab, &cfg).is_err());
    let mut cfg = pd_config(&sys);
    cfg.zap_eta = 1.0;
    assert!(run(&sys, &traj, &tab, &cfg).is_err());
    let mut cfg = pd_config(&sys);
    cfg.theta0 = Some(vec![0.0; 3]);
    assert!(run(&sys, &traj, &tab, &cfg).is_err());
    assert!(run(&sys, &Trajectory::default(), &tab, &pd_config(&sys)).is_err());
}

/// Scalar LQR data from a stabilizing feedback plus a sinusoidal probe.
fn lqr_data() -> (LqrSystem, Trajectory) {
    let sys = LqrSystem::scalar(1.1, 1.0, 1.0, 0.5).unwrap();
    let k = LinearFeedback { k: DMatrix::from_element(1, 1, 0.6) };
    let traj = rollout(&sys, &k, &ProbeSignal::default(), &[1.0], 400).unwrap();
    (sys, traj)
}

#[test]
fn dqn_residual_matches_moment_formula() {
    let (sys, traj) = lqr_data();
    let arch = QuadBasis::new(1, 1, false);
    let n = traj.len() as f64;
    let (mut sigma, mut bc, mut bx) = (DMatrix::zeros(3, 3), DVector::zeros(3), DVector::zeros(3));
    for k in 0..traj.len() {
        let (x, u, xn) = (traj.states[k][0], traj.inputs[k][0], traj.next[k][0]);
        let psi = DVector::from_column_slice(&[x * x, 2.0 * x * u, u * u]);
        sigma += &psi * psi.transpose() / n;
        bc += &psi * (traj.costs[k] / n);
        bx += &psi * (xn * xn / n);
    }
    for theta in [[2.0, 0.5, 1.0], [1.3, -0.2, 0.7], [0.4, 0.1, 3.0]] {
        let th = DVector::from_column_slice(&theta);
        let low = theta[0] - theta[1] * theta[1] / theta[2];
        let expected = -(&sigma * &th) + &bc + &bx * low;
        let f = projected_bellman_residual(&sys, &traj, &arch, &theta, &ZetaSpec::Features, Criterion::total_cost()).unwrap();
        assert!((f - expected).amax() < 1e-10);
    }
}

#[test]
fn residual_flags_steep_vector_field() {
    let (sys, traj) = lqr_data();
    let arch = QuadBasis::new(1, 1, false);
    let crit = Criterion::total_cost();
    let near = residual_report(&sys, &traj, &arch, &[1.0, 0.5, 1e-9], &ZetaSpec::Features, crit, 1e6).unwrap();
    assert!(near.non_lipschitz);
    let calm = residual_report(&sys, &traj, &arch, &[2.0, 0.5, 1.0], &ZetaSpec::Features, crit, 1e6).unwrap();
    assert!(!calm.non_lipschitz);
    assert!((calm.norm_inf - calm.residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()))).abs() < 1e-15);
}

#[test]
fn dqn_fixed_point_on_indicator_basis() {
    // Q-table basis with J ≡ 0: DQN without a proximal term is value iteration on Q.
    let sys = random_system(6, 2, 10);
    let sol = value_iteration(&sys, Criterion::total_cost(), 1e-14, 100_000).unwrap();
    let m = sys.n_inputs();
    // The equilibrium pair has no coordinate.
    let d = 6 * m - 1;
    let arch = cvxq::approx::FnBasis::new(
        "qtable",
        d,
        move |_| vec![0.0; d],
        move |x, u| {
            let mut v = vec![0.0; d];
            let i = x[0] as usize * m + u[0] as usize;
            if i > 0 {
                v[i - 1] = 1.0;
            }
            v
        },
    );
    let traj = exhaustive_pairs(&sys);
    let mut cfg = AlgoConfig::new(Algorithm::Dqn);
    cfg.batches = 1;
    cfg.epochs = Some(200);
    cfg.step = StepSchedule::Off;
    let out = run_dqn(&sys, &traj, &arch, &cfg).unwrap();
    for (x, u) in sys.pairs() {
        let i = x * m + u;
        if i > 0 {
            assert!((out.theta[i - 1] - sol.q[x][u]).abs() < 1e-10);
        }
    }
    let f = projected_bellman_residual(&sys, &traj, &arch, &out.theta, &ZetaSpec::Features, Criterion::total_cost()).unwrap();
    assert!(f.amax() < 1e-10);
}
