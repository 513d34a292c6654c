use super::epoch::EpochProgram;
use super::record::{EpochRecord, RunRecord};
use super::{AlgoConfig, Algorithm, ConstraintMode};
use crate::approx::{cone_lower_bounds, min_q, Architecture, ConstraintSpec};
use crate::env::ControlSystem;
use crate::error::{check_dim, Error, Result};
use crate::explore::Trajectory;
use crate::linalg::{inf_norm, min_eigenvalue};
use crate::losses::{assemble_batch, equal_windows, BatchLossData, LossSpec};
use crate::qpcore::{primal_dual_step, zap_gain_update, PrimalDualStep, QpSolution, QpStatus};
use nalgebra::{DMatrix, DVector};
use std::ops::Range;
use std::time::Instant;

/// Final parameter, multipliers (pd-BCQL only) and the run record.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub theta: Vec<f64>,
    pub lambda: Option<Vec<f64>>,
    pub record: RunRecord,
}

/// Dispatches on `cfg.algorithm`.
pub fn run<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    match cfg.algorithm {
        Algorithm::Lpql => run_lpql(sys, traj, arch, cfg),
        Algorithm::Cql => run_cql(sys, traj, arch, cfg),
        Algorithm::Bcql => run_bcql(sys, traj, arch, cfg),
        Algorithm::PdBcql => run_pd_bcql(sys, traj, arch, cfg),
        Algorithm::Zap => run_zap(sys, traj, arch, cfg),
        Algorithm::Dqn => run_dqn(sys, traj, arch, cfg),
    }
}

struct Setup {
    spec: LossSpec,
    windows: Vec<Range<usize>>,
    epochs: usize,
    theta0: DVector<f64>,
}

fn setup<A: Architecture + ?Sized>(traj: &Trajectory, arch: &A, cfg: &AlgoConfig, with_plus: bool) -> Result<Setup> {
    cfg.validate()?;
    if traj.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let d = arch.dim();
    let theta0 = match &cfg.theta0 {
        Some(t) => {
            check_dim("theta0", d, t.len())?;
            DVector::from_column_slice(t)
        }
        None => DVector::zeros(d),
    };
    let windows = equal_windows(traj.len(), cfg.batches);
    let epochs = cfg.epochs.unwrap_or(windows.len());
    let spec = LossSpec {
        criterion: cfg.criterion,
        mu: cfg.mu.clone(),
        plus_variant: cfg.plus_variant,
        with_plus,
        zeta: cfg.zeta.resolve(traj),
        zeta_plus: cfg.zeta_plus.resolve(traj),
    };
    Ok(Setup {
        spec,
        windows,
        epochs,
        theta0,
    })
}

fn wants_plus(cfg: &AlgoConfig) -> bool {
    cfg.kappa_plus > 0.0 && cfg.mode != ConstraintMode::AdvantageCone
}

#[allow(clippy::too_many_arguments)]
fn epoch_record(
    data: &BatchLossData,
    epoch: usize,
    batch: usize,
    alpha: f64,
    theta: &DVector<f64>,
    prev: &DVector<f64>,
    lambda: Option<&DVector<f64>>,
    qp_iterations: usize,
    start: Instant,
) -> EpochRecord {
    let z = data.z(theta);
    let zp = data.z_plus(theta);
    EpochRecord {
        epoch,
        batch,
        alpha,
        mu_j: data.mu_value(theta),
        be_loss: data.be_loss(theta),
        plus_loss: data.plus_loss(theta.as_slice()),
        z_inf: inf_norm(&z),
        z_min: if z.is_empty() { 0.0 } else { z.min() },
        z_plus_max: if zp.is_empty() { 0.0 } else { zp.max() },
        lambda_inf: lambda.map_or(0.0, inf_norm),
        theta_step: inf_norm(&(theta - prev)),
        qp_iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

fn finish_qp(record: &mut RunRecord, sol: &QpSolution) {
    record.status = Some(sol.status);
    record.kkt = Some(sol.kkt);
    if sol.status == QpStatus::MaxIter {
        record.warn(format!(
            "QP stopped at the iteration cap (KKT residual {:e})",
            sol.kkt.max()
        ));
    }
}

/// One-shot program over the whole trajectory.
fn one_shot<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    let start = Instant::now();
    let st = setup(traj, arch, cfg, wants_plus(cfg))?;
    let data = assemble_batch(arch, sys, traj, 0..traj.len(), &st.spec)?;
    let mut record = RunRecord {
        strong_convexity: min_eigenvalue(&data.p),
        ..RunRecord::default()
    };
    let prog = EpochProgram {
        data: &data,
        kappa_be: cfg.kappa_be,
        kappa_plus: cfg.kappa_plus,
        mode: cfg.mode,
        tol: cfg.tol,
        constraint: arch.constraint(),
        linear: None,
        prox: None,
    };
    let (theta, sol) = prog.solve(&cfg.qp, &st.theta0)?;
    finish_qp(&mut record, &sol);
    if sol.status != QpStatus::Optimal {
        return Err(Error::NonConvergence {
            what: "one-shot program",
            iterations: sol.iterations,
            residual: sol.kkt.max(),
        });
    }
    record
        .epochs
        .push(epoch_record(&data, 1, 0, f64::INFINITY, &theta, &st.theta0, None, sol.iterations, start));
    if cfg.keep_history {
        record.thetas = vec![st.theta0.as_slice().to_vec(), theta.as_slice().to_vec()];
    }
    Ok(RunOutput {
        theta: theta.as_slice().to_vec(),
        lambda: None,
        record,
    })
}

/// LP convex Q-learning: `max ⟨μ,J^θ⟩` s.t. `z(θ) = 0`, `z⁺(θ) ≤ 0`.
pub fn run_lpql<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    let lp = AlgoConfig {
        kappa_be: 0.0,
        kappa_plus: 0.0,
        tol: 0.0,
        mode: ConstraintMode::HardGalerkin,
        ..cfg.clone()
    };
    one_shot(sys, traj, arch, &lp)
}

/// Convex Q-learning: `min −⟨μ,J^θ⟩ + κℰ + κ⁺ℰ⁺` under `cfg.mode`, in one shot.
pub fn run_cql<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    one_shot(sys, traj, arch, cfg)
}

/// Shared loop of BCQL and Zap-BCQL.
fn batch_loop<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig, zap: bool) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    let st = setup(traj, arch, cfg, wants_plus(cfg))?;
    let batches: Vec<BatchLossData> = st
        .windows
        .iter()
        .map(|w| assemble_batch(arch, sys, traj, w.clone(), &st.spec))
        .collect::<Result<_>>()?;
    prox_iterations(&batches, &arch.constraint(), cfg, zap, st.theta0, st.epochs)
}

/// `θₙ₊₁ = argmin {−⟨μ,J⟩ + κℰₙ + κ⁺ℰₙ⁺ + (1/(2αₙ₊₁))‖θ − θₙ‖²_W}` cycling over `batches`.
pub(crate) fn prox_iterations(
    batches: &[BatchLossData],
    constraint: &ConstraintSpec,
    cfg: &AlgoConfig,
    zap: bool,
    theta0: DVector<f64>,
    epochs: usize,
) -> Result<RunOutput> {
    let start = Instant::now();
    cfg.validate()?;
    let d = theta0.len();
    let total: usize = batches.iter().map(|b| b.r).sum();
    let mut record = RunRecord::default();
    let mut pooled = DMatrix::zeros(d, d);
    for b in batches {
        check_dim("batch dimension", d, b.d)?;
        pooled += &b.p * (b.r as f64 / total as f64);
    }
    record.strong_convexity = min_eigenvalue(&pooled);
    if record.strong_convexity <= 1e-10 {
        record.warn(format!(
            "Bellman-error loss is not strongly convex (λ_min = {:e}); convergence is not guaranteed",
            record.strong_convexity
        ));
    }
    let mut theta = theta0;
    let mut w = DMatrix::identity(d, d);
    if cfg.keep_history {
        record.thetas.push(theta.as_slice().to_vec());
    }
    for n in 1..=epochs {
        let b = (n - 1) % batches.len();
        let data = &batches[b];
        let alpha = cfg.step.alpha(n);
        if zap {
            let a = zap_hessian(data, cfg, &theta);
            let beta = (n as f64).powf(-cfg.zap_eta);
            w = zap_gain_update(&w, &a, beta)?;
        }
        let gain = if zap {
            &w + DMatrix::identity(d, d) * cfg.zap_ridge
        } else {
            DMatrix::identity(d, d)
        };
        let prog = EpochProgram {
            data,
            kappa_be: cfg.kappa_be,
            kappa_plus: cfg.kappa_plus,
            mode: cfg.mode,
            tol: cfg.tol,
            constraint: constraint.clone(),
            linear: None,
            prox: Some((alpha, &gain, &theta)),
        };
        let (next, sol) = prog.solve(&cfg.qp, &theta)?;
        finish_qp(&mut record, &sol);
        record
            .epochs
            .push(epoch_record(data, n, b, alpha, &next, &theta, None, sol.iterations, start));
        theta = next;
        if cfg.keep_history {
            record.thetas.push(theta.as_slice().to_vec());
        }
    }
    Ok(RunOutput {
        theta: theta.as_slice().to_vec(),
        lambda: None,
        record,
    })
}

/// `∇²` of `κℰ + κ⁺ℰ⁺` at `θ`: `2κP + 2κ⁺ Σ wᵣ d dᵀ` over penalty rows active at `θ`.
fn zap_hessian(data: &BatchLossData, cfg: &AlgoConfig, theta: &DVector<f64>) -> DMatrix<f64> {
    let mut a = &data.p * (2.0 * cfg.kappa_be);
    if wants_plus(cfg) {
        for row in &data.plus {
            let best = row
                .diffs
                .iter()
                .map(|v| (v.dot(theta.as_slice()), v))
                .fold(None, |acc: Option<(f64, _)>, cur| match acc {
                    Some(a) if a.0 >= cur.0 => Some(a),
                    _ => Some(cur),
                });
            if let Some((val, v)) = best {
                if val > 0.0 {
                    v.add_outer_to(2.0 * cfg.kappa_plus * row.weight, &mut a);
                }
            }
        }
    }
    a
}

/// Batch convex Q-learning with the scalar proximal regularizer.
pub fn run_bcql<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    batch_loop(sys, traj, arch, cfg, false)
}

/// BCQL with the matrix gain `Wₙ` tracking the loss Hessian.
pub fn run_zap<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    batch_loop(sys, traj, arch, cfg, true)
}

/// Primal-dual BCQL: a cone-constrained θ-step on the Lagrangian followed by a
/// clamped multiplier step on `z(θ) ≥ 0`.
pub fn run_pd_bcql<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    let start = Instant::now();
    let constraint = arch.constraint();
    if matches!(constraint, ConstraintSpec::Custom(_)) {
        return Err(Error::InvalidParameter(
            "pd-BCQL needs a sign-constrained (box) cone".into(),
        ));
    }
    if matches!(cfg.step, super::StepSchedule::Off) {
        return Err(Error::InvalidParameter("pd-BCQL needs finite step sizes".into()));
    }
    let st = setup(traj, arch, cfg, false)?;
    let d = arch.dim();
    let batches: Vec<BatchLossData> = st
        .windows
        .iter()
        .map(|w| assemble_batch(arch, sys, traj, w.clone(), &st.spec))
        .collect::<Result<_>>()?;
    let m = st.spec.zeta.dim(arch);
    let lo = cone_lower_bounds(&constraint, d);
    let mut record = RunRecord::default();
    let mut pooled = DMatrix::zeros(d, d);
    for b in &batches {
        pooled += &b.p * (b.r as f64 / traj.len() as f64);
    }
    record.strong_convexity = min_eigenvalue(&pooled);
    if record.strong_convexity <= 1e-10 {
        record.warn(format!(
            "Bellman-error loss is not strongly convex (λ_min = {:e}); convergence is not guaranteed",
            record.strong_convexity
        ));
    }
    let mut theta = lo.zip_map(&st.theta0, |l, t| t.max(l));
    let mut lambda = DVector::zeros(m);
    if cfg.keep_history {
        record.thetas.push(theta.as_slice().to_vec());
        record.lambdas.push(lambda.as_slice().to_vec());
    }
    for n in 1..=st.epochs {
        let b = (n - 1) % batches.len();
        let data = &batches[b];
        let alpha = cfg.step.alpha(n);
        let p = &data.p * cfg.kappa_be;
        let c = -&data.mu + &data.q * (2.0 * cfg.kappa_be);
        let ids = &data.zeta_ids;
        let lam_sub = DVector::from_iterator(ids.len(), ids.iter().map(|&i| lambda[i]));
        let lam_max = DVector::from_element(ids.len(), cfg.lambda_max);
        let step = PrimalDualStep {
            p: &p,
            c: &c,
            g: &data.g,
            h: &data.h,
            lo: &lo,
        };
        let (next, lam_next) = primal_dual_step(&step, &theta, &lam_sub, alpha, &lam_max, &cfg.qp)?;
        for (k, &i) in ids.iter().enumerate() {
            lambda[i] = lam_next[k];
        }
        record
            .epochs
            .push(epoch_record(data, n, b, alpha, &next, &theta, Some(&lambda), 0, start));
        theta = next;
        if cfg.keep_history {
            record.thetas.push(theta.as_slice().to_vec());
            record.lambdas.push(lambda.as_slice().to_vec());
        }
    }
    Ok(RunOutput {
        theta: theta.as_slice().to_vec(),
        lambda: Some(lambda.as_slice().to_vec()),
        record,
    })
}

/// DQN: each update fits `Q^θ` to the frozen target `c + γQ̲^{θₙ}(x⁺)` with the
/// proximal term `(1/αₙ₊₁)‖θ − θₙ‖²`.
pub fn run_dqn<S, A>(sys: &S, traj: &Trajectory, arch: &A, cfg: &AlgoConfig) -> Result<RunOutput>
where
    S: ControlSystem + ?Sized,
    A: Architecture + ?Sized,
{
    let start = Instant::now();
    let st = setup(traj, arch, cfg, false)?;
    let d = arch.dim();
    let gamma = cfg.criterion.gamma;
    let feats: Vec<_> = (0..traj.len()).map(|k| arch.psi(&traj.states[k], &traj.inputs[k])).collect();
    let grams: Vec<DMatrix<f64>> = st
        .windows
        .iter()
        .map(|w| {
            let mut g = DMatrix::zeros(d, d);
            for k in w.clone() {
                feats[k].add_outer_to(1.0 / w.len() as f64, &mut g);
            }
            g
        })
        .collect();
    let mut record = RunRecord::default();
    let mut theta = st.theta0.clone();
    if cfg.keep_history {
        record.thetas.push(theta.as_slice().to_vec());
    }
    for n in 1..=st.epochs {
        let b = (n - 1) % st.windows.len();
        let w = st.windows[b].clone();
        let r = w.len() as f64;
        let alpha = cfg.step.alpha(n);
        let mut rhs = DVector::zeros(d);
        let mut targets = Vec::with_capacity(w.len());
        for k in w.clone() {
            let xn = &traj.next[k];
            let (_, qmin) = min_q(arch, theta.as_slice(), xn, &sys.inputs(xn))?;
            let y = traj.costs[k] + gamma * qmin;
            feats[k].add_to(cfg.kappa_be * y / r, &mut rhs);
            targets.push(y);
        }
        let mut h = &grams[b] * cfg.kappa_be;
        if alpha.is_finite() {
            for i in 0..d {
                h[(i, i)] += 1.0 / alpha;
            }
            rhs += &theta / alpha;
        }
        let next = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                record.warn(format!("DQN normal equations singular at update {n}; using ridge {:e}", cfg.ridge));
                for i in 0..d {
                    h[(i, i)] += cfg.ridge;
                }
                h.cholesky()
                    .ok_or_else(|| Error::NotPositiveDefinite("DQN normal equations with ridge".into()))?
                    .solve(&rhs)
            }
        };
        let loss = w
            .clone()
            .zip(&targets)
            .map(|(k, y)| (y - feats[k].dot(next.as_slice())).powi(2))
            .sum::<f64>()
            / r;
        record.epochs.push(EpochRecord {
            epoch: n,
            batch: b,
            alpha,
            mu_j: st.spec.mu.vector(arch).dot(&next),
            be_loss: loss,
            plus_loss: 0.0,
            z_inf: 0.0,
            z_min: 0.0,
            z_plus_max: 0.0,
            lambda_inf: 0.0,
            theta_step: inf_norm(&(&next - &theta)),
            qp_iterations: 0,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        theta = next;
        if cfg.keep_history {
            record.thetas.push(theta.as_slice().to_vec());
        }
    }
    Ok(RunOutput {
        theta: theta.as_slice().to_vec(),
        lambda: None,
        record,
    })
}
