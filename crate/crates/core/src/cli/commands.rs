use super::config::{matrix, zeta_spec, AlgoName, Arch, Config, PolicyConfig, System, ZetaConfig};
use crate::algos::{residual_report, run, EpochRecord, ResidualReport, RunOutput, RunRecord};
use crate::approx::{min_q, Architecture, QuadBasis, ThetaFile};
use crate::env::{apply_discount, ControlSystem, FiniteSystem, LqrSystem, MountainCar};
use crate::error::{Error, Result};
use crate::explore::{exhaustive_pairs, rollout_with_restarts, Constant, ExplorationPolicy, LinearFeedback, ProbeIndexed, Relay, Trajectory};
use crate::mdpx::{avg_cost_q_oracle, run_bcql_mdp, sample_chain, AvgCostSolution, CondExp, CondExpMode, Mdp, Transition};
use crate::oracles::{
    lqr_q_matrices, lqr_sdp_gridded, mc_value_iteration, riccati_solve, sphere_directions, value_iteration, GridSpec,
    GridValue, RiccatiSolution, SdpSettings, ValueSolution,
};
use crate::qpcore::{KktResiduals, QpStatus};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const NON_CONVERGENCE: i32 = 4;
    pub const MISMATCH: i32 = 5;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => exit::CONFIG,
        Error::Infeasible(_) | Error::Unbounded(_) => exit::INFEASIBLE,
        Error::NonConvergence { .. } => exit::NON_CONVERGENCE,
        Error::FingerprintMismatch { .. } => exit::MISMATCH,
        _ => exit::FAILURE,
    }
}

/// Comparison of a run against the exact solution of its system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleComparison {
    Lqr {
        /// Row-major `M̂` and `M°`.
        m_hat: Vec<f64>,
        m_opt: Vec<f64>,
        /// `max |M̂ − M°|`
        m_error: f64,
        /// `‖M̂ − M°‖_F / ‖M°‖_F`
        m_rel_error: f64,
    },
    Finite {
        j_sup_error: f64,
        q_sup_error: f64,
        /// Fraction of states where the greedy input is optimal.
        greedy_agreement: f64,
    },
    MountainCar {
        /// Median over visited bins of the per-bin median `|J^θ − J°| / J°`.
        median_rel_error: f64,
        visited_bins: usize,
        goal_reached: usize,
        starts: usize,
        /// Steps to the goal per start (`max_steps` when it was not reached).
        steps: Vec<usize>,
    },
    Mdp {
        eta_opt: f64,
        eta_hat: f64,
        h_sup_error: f64,
        q_sup_error: f64,
        greedy_agreement: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub system: String,
    pub architecture: String,
    pub fingerprint: String,
    pub algorithm: AlgoName,
    pub samples: usize,
    pub dim: usize,
    pub updates: usize,
    pub status: Option<QpStatus>,
    pub kkt: Option<KktResiduals>,
    /// Objective terms of the last update.
    pub final_terms: Option<EpochRecord>,
    pub strong_convexity: f64,
    pub warnings: Vec<String>,
    pub oracle: Option<OracleComparison>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// Exit code for a run that produced this summary.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Some(QpStatus::Infeasible) | Some(QpStatus::Unbounded) => exit::INFEASIBLE,
            Some(QpStatus::MaxIter) => exit::NON_CONVERGENCE,
            _ => exit::OK,
        }
    }
}

/// Exact solution of a system, as written by `cvxq oracle`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    Lqr { system_hash: String, riccati: RiccatiSolution },
    Finite { system_hash: String, value: ValueSolution },
    MountainCar { system_hash: String, grid: GridValue },
    Mdp { system_hash: String, solution: AvgCostSolution },
}

impl Reference {
    fn hash(&self) -> &str {
        match self {
            Reference::Lqr { system_hash, .. }
            | Reference::Finite { system_hash, .. }
            | Reference::MountainCar { system_hash, .. }
            | Reference::Mdp { system_hash, .. } => system_hash,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    /// Loads a reference and checks that it belongs to the configured system.
    pub fn load_for(path: &Path, cfg: &Config) -> Result<Reference> {
        let r: Reference = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let want = cfg.system_hash();
        if r.hash() != want {
            return Err(Error::FingerprintMismatch {
                expected: want,
                found: r.hash().to_string(),
            });
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareMetrics {
    pub schema_version: u32,
    pub fingerprint: String,
    pub points: usize,
    pub sup_error: f64,
    /// Root mean square error over the points.
    pub l2_error: f64,
    pub greedy_agreement: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualOutput {
    pub schema_version: u32,
    pub fingerprint: String,
    pub zeta: ZetaConfig,
    pub report: ResidualReport,
    /// `‖f̄(θ)‖∞ ≤ 1e-6`
    pub certified: bool,
}

impl System {
    fn control(&self) -> Option<&dyn ControlSystem> {
        match self {
            System::Lqr(s) => Some(s),
            System::Finite(s) => Some(s),
            System::MountainCar(s) => Some(s),
            System::Mdp(_) => None,
        }
    }
}

/// Exact solution of the configured system.
pub fn compute_reference(cfg: &Config) -> Result<Reference> {
    let sys = cfg.build_system()?;
    let system_hash = cfg.system_hash();
    Ok(match sys {
        System::Lqr(l) => Reference::Lqr {
            system_hash,
            riccati: riccati_solve(&l, 1e-13, 1_000_000)?,
        },
        System::Finite(f) => Reference::Finite {
            system_hash,
            value: value_iteration(&f, apply_discount(cfg.algorithm.discount)?, 1e-12, 1_000_000)?,
        },
        System::MountainCar(car) => Reference::MountainCar {
            system_hash,
            grid: mc_value_iteration(&car, &GridSpec::default())?,
        },
        System::Mdp(m) => Reference::Mdp {
            system_hash,
            solution: avg_cost_q_oracle(&m, 1e-12, 1_000_000)?,
        },
    })
}

/// The reference named in `[output]` when it exists, otherwise a fresh one.
fn reference(cfg: &Config) -> Result<Reference> {
    match &cfg.output.reference {
        Some(p) if p.exists() => Reference::load_for(p, cfg),
        _ => compute_reference(cfg),
    }
}

/// `cvxq oracle`: writes the reference to `out` (or the configured path).
pub fn cmd_oracle(config: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let cfg = Config::from_path(config)?;
    let path = match (out, &cfg.output.reference) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => cfg.output.dir.join("reference.json"),
    };
    let r = compute_reference(&cfg)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    r.save(&path)?;
    Ok(path)
}

enum Data {
    Traj(Trajectory),
    Mdp(Vec<Transition>),
}

fn explore(cfg: &Config, sys: &System) -> Result<Data> {
    let ex = &cfg.exploration;
    if let Some(p) = &ex.trajectory {
        let t = Trajectory::read_csv(p)?;
        return Ok(match sys {
            System::Mdp(m) => {
                let mut out = Vec::with_capacity(t.len());
                for k in 0..t.len() {
                    let tr = Transition {
                        x: FiniteSystem::index(&t.states[k]),
                        u: FiniteSystem::index(&t.inputs[k]),
                        cost: t.costs[k],
                        next: FiniteSystem::index(&t.next[k]),
                    };
                    if tr.x >= m.n_states() || tr.next >= m.n_states() || tr.u >= m.n_inputs() {
                        return Err(Error::InvalidParameter(format!("transition {k} outside the MDP")));
                    }
                    out.push(tr);
                }
                Data::Mdp(out)
            }
            _ => Data::Traj(t),
        });
    }
    let n = ex.steps;
    let since = Cell::new(0usize);
    let every = ex.restart_every;
    let tick = |done: bool| {
        let c = since.get() + 1;
        if done || every.is_some_and(|e| c >= e) {
            since.set(0);
            true
        } else {
            since.set(c);
            false
        }
    };
    let traj = match sys {
        System::Lqr(l) => {
            let k = match &ex.policy {
                Some(PolicyConfig::LinearFeedback { k }) => matrix(k, "k")?,
                _ => DMatrix::zeros(l.m(), l.n()),
            };
            let x0 = ex.x0.clone().unwrap_or_else(|| vec![1.0; l.n()]);
            match &ex.policy {
                Some(PolicyConfig::Constant { u }) => {
                    rollout_with_restarts(l, &Constant(u.clone()), &ex.probe, &[x0], n, |_| tick(false))?
                }
                _ => rollout_with_restarts(l, &LinearFeedback { k }, &ex.probe, &[x0], n, |_| tick(false))?,
            }
        }
        System::Finite(f) => {
            if let Some(PolicyConfig::Exhaustive) = ex.policy {
                return Ok(Data::Traj(exhaustive_pairs(f)));
            }
            let mut starts: Vec<Vec<f64>> = (0..f.n_states()).map(FiniteSystem::state).collect();
            if let Some(x0) = &ex.x0 {
                starts.rotate_left(FiniteSystem::index(x0).min(f.n_states() - 1));
            }
            let policy: Box<dyn ExplorationPolicy> = match &ex.policy {
                Some(PolicyConfig::Constant { u }) => Box::new(Constant(u.clone())),
                Some(PolicyConfig::ProbeIndexed { cycle: true }) => Box::new(ProbeIndexed::Cycle),
                _ => Box::new(ProbeIndexed::Quantize),
            };
            rollout_with_restarts(f, policy.as_ref(), &ex.probe, &starts, n, |_| tick(false))?
        }
        System::MountainCar(car) => {
            let mut starts = car.spread_starts(ex.starts.max(1));
            if let Some(x0) = &ex.x0 {
                starts.insert(0, x0.clone());
            }
            let policy: Box<dyn ExplorationPolicy> = match &ex.policy {
                Some(PolicyConfig::Constant { u }) => Box::new(Constant(u.clone())),
                Some(PolicyConfig::ProbeIndexed { cycle: true }) => Box::new(ProbeIndexed::Cycle),
                Some(PolicyConfig::ProbeIndexed { cycle: false }) => Box::new(ProbeIndexed::Quantize),
                Some(PolicyConfig::Relay { coord, gain }) => Box::new(Relay {
                    coord: *coord,
                    gain: *gain,
                }),
                _ => Box::new(Relay { coord: 1, gain: 0.05 }),
            };
            rollout_with_restarts(car, policy.as_ref(), &ex.probe, &starts, n, |y| tick(car.at_goal(y)))?
        }
        System::Mdp(m) => {
            let uniform = vec![vec![1.0 / m.n_inputs() as f64; m.n_inputs()]; m.n_states()];
            let x0 = ex.x0.as_ref().map_or(0, |x| FiniteSystem::index(x));
            return Ok(Data::Mdp(sample_chain(m, &uniform, x0, n, ex.seed)?));
        }
    };
    Ok(Data::Traj(traj))
}

fn mdp_estimator(mode: CondExpMode, m: &Mdp, samples: &[Transition]) -> Result<CondExp> {
    let (n, k) = (m.n_states(), m.n_inputs());
    Ok(match mode {
        CondExpMode::Direct => CondExp::direct(m),
        CondExpMode::PretendDeterministic => CondExp::pretend_deterministic(n, k),
        CondExpMode::EmpiricalPmf => {
            let mut e = CondExp::empirical(n, k);
            e.extend(samples)?;
            e
        }
        CondExpMode::Galerkin => {
            let feats = (0..n * k)
                .map(|p| (0..n * k).map(|i| if i == p { 1.0 } else { 0.0 }).collect())
                .collect();
            let mut e = CondExp::galerkin(n, k, feats)?;
            e.extend(samples)?;
            e
        }
    })
}

fn sup(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |a: f64, b| a.max(b.abs()))
}

/// `M̂`: the value block, or the Schur complement `min_u` of `M^Q` without one.
pub fn lqr_value_matrix(arch: &QuadBasis, theta: &[f64]) -> DMatrix<f64> {
    let (mq, mj) = arch.matrices(theta);
    if arch.value_block {
        return mj;
    }
    let (n, m) = (arch.n, arch.m);
    let muu = mq.view((n, n), (m, m)).into_owned();
    let mxu = mq.view((0, n), (n, m)).into_owned();
    match muu.cholesky() {
        Some(c) => mq.view((0, 0), (n, n)).into_owned() - &mxu * c.solve(&mxu.transpose()),
        None => DMatrix::from_element(n, n, f64::NAN),
    }
}

fn lqr_comparison(m_hat: &DMatrix<f64>, m_opt: &DMatrix<f64>) -> OracleComparison {
    let diff = m_hat - m_opt;
    let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
    OracleComparison::Lqr {
        m_hat: row_major(m_hat),
        m_opt: row_major(m_opt),
        m_error: diff.amax(),
        m_rel_error: diff.norm() / m_opt.norm().max(f64::MIN_POSITIVE),
    }
}

/// Whether input `u` is optimal for `q°[x]` up to `1e-9` (relative).
fn optimal_input(q_opt: &[f64], u: usize) -> bool {
    let best = q_opt.iter().cloned().fold(f64::INFINITY, f64::min);
    q_opt[u] <= best + 1e-9 * best.abs().max(1.0)
}

fn argmin(row: &[f64]) -> usize {
    (0..row.len()).fold(0, |b, i| if row[i] < row[b] { i } else { b })
}

/// Median over visited bins of the per-bin median relative error of `J^θ`
/// against the grid reference, and the number of such bins.
pub fn visited_bin_error(arch: &crate::approx::BinnedBasis, theta: &[f64], states: &[Vec<f64>], grid: &GridValue) -> (f64, usize) {
    let mut per_bin: HashMap<usize, Vec<f64>> = HashMap::new();
    for x in states {
        if let Some(b) = arch.bin_index(x) {
            let r = grid.interpolate(x);
            if r > 0.0 {
                per_bin.entry(b).or_default().push(((arch.psi_j(x).dot(theta) - r) / r).abs());
            }
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.total_cmp(b));
        v[v.len() / 2]
    };
    let mut meds: Vec<f64> = per_bin.values_mut().map(median).collect();
    if meds.is_empty() {
        return (f64::NAN, 0);
    }
    (median(&mut meds), meds.len())
}

/// Steps the greedy policy of `θ` needs to park from each start, capped at `max_steps`.
pub fn greedy_goal_steps<A: Architecture + ?Sized>(car: &MountainCar, arch: &A, theta: &[f64], starts: &[Vec<f64>], max_steps: usize) -> Result<Vec<usize>> {
    let inputs = car.inputs(&[0.0, 0.0]);
    starts
        .iter()
        .map(|s| {
            let mut x = s.clone();
            let mut k = 0;
            while !car.at_goal(&x) && k < max_steps {
                let (u, _) = min_q(arch, theta, &x, &inputs)?;
                x = car.dynamics(&x, &u);
                k += 1;
            }
            Ok(k)
        })
        .collect()
}

fn write_surface(path: &Path, car: &MountainCar, arch: &dyn Architecture, theta: &[f64], grid: Option<&GridValue>, size: [usize; 2]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["z", "v", "j_theta", "j_ref"])?;
    for i in 0..size[0] {
        let z = car.z_min + (car.z_goal - car.z_min) * i as f64 / (size[0] - 1) as f64;
        for j in 0..size[1] {
            let v = -car.v_bar + 2.0 * car.v_bar * j as f64 / (size[1] - 1) as f64;
            let x = [z, v];
            let jr = grid.map_or(f64::NAN, |g| g.interpolate(&x));
            w.write_record([z.to_string(), v.to_string(), arch.psi_j(&x).dot(theta).to_string(), jr.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `cvxq run`: rollout, algorithm, evaluation. Writes `trajectory.csv`,
/// `record.csv`, `theta.json`, `summary.json` and, for Mountain Car,
/// `value_surface.csv` into the output directory.
pub fn cmd_run(config: &Path) -> Result<RunSummary> {
    let cfg = Config::from_path(config)?;
    run_config(&cfg)
}

pub fn run_config(cfg: &Config) -> Result<RunSummary> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let arch = cfg.build_arch(&sys)?;
    let dir = &cfg.output.dir;
    let mut files = Vec::new();

    if cfg.algorithm.name == AlgoName::LqrSdp {
        let (System::Lqr(l), Arch::Quadratic(q)) = (&sys, &arch) else {
            return Err(Error::Config("lqr_sdp needs an lqr system".into()));
        };
        return run_sdp(cfg, l, q);
    }

    let data = explore(cfg, &sys)?;
    let (out, samples, states): (RunOutput, usize, Vec<Vec<f64>>) = match (&data, &sys) {
        (Data::Traj(t), _) => {
            let acfg = cfg.algo_config(&sys, &arch, &t.states)?;
            let ctl = sys.control().expect("trajectory data comes from a control system");
            (run(ctl, t, arch.as_dyn(), &acfg)?, t.len(), t.states.clone())
        }
        (Data::Mdp(s), System::Mdp(m)) => {
            let states: Vec<Vec<f64>> = s.iter().map(|t| FiniteSystem::state(t.x)).collect();
            let acfg = cfg.algo_config(&sys, &arch, &states)?;
            let est = mdp_estimator(cfg.algorithm.cond_exp, m, s)?;
            (run_bcql_mdp(s, m.n_inputs(), arch.as_dyn(), &est, &m.norm, &acfg)?, s.len(), states)
        }
        _ => unreachable!("MDP samples come from an MDP"),
    };

    std::fs::create_dir_all(dir)?;
    if cfg.output.write_trajectory {
        let p = dir.join("trajectory.csv");
        match &data {
            Data::Traj(t) => t.write_csv(&p)?,
            Data::Mdp(s) => {
                let mut t = Trajectory::default();
                for tr in s {
                    t.push(FiniteSystem::state(tr.x), FiniteSystem::state(tr.u), tr.cost, FiniteSystem::state(tr.next));
                }
                t.write_csv(&p)?
            }
        }
        files.push(p);
    }
    let p = dir.join("record.csv");
    write_record(&out.record, &p)?;
    files.push(p);
    let p = dir.join("theta.json");
    ThetaFile::new(arch.as_dyn(), &out.theta).save(&p)?;
    files.push(p);

    let reference = reference(cfg)?;
    let theta = &out.theta;
    let oracle = match (&sys, &arch, &reference) {
        (System::Lqr(_), Arch::Quadratic(q), Reference::Lqr { riccati, .. }) => {
            Some(lqr_comparison(&lqr_value_matrix(q, theta), &riccati.m))
        }
        (System::Finite(f), Arch::Tabular(t), Reference::Finite { value, .. }) => {
            let (j, q) = t.decode(theta);
            Some(OracleComparison::Finite {
                j_sup_error: sup(j.iter().zip(&value.j).map(|(a, b)| a - b)),
                q_sup_error: sup(q.iter().flatten().zip(value.q.iter().flatten()).map(|(a, b)| a - b)),
                greedy_agreement: (0..f.n_states()).filter(|&x| optimal_input(&value.q[x], argmin(&q[x]))).count() as f64
                    / f.n_states() as f64,
            })
        }
        (System::MountainCar(car), Arch::Binned(b), Reference::MountainCar { grid, .. }) => {
            let (median_rel_error, visited_bins) = visited_bin_error(b, theta, &states, grid);
            let starts = MountainCar::standard_starts();
            let steps = greedy_goal_steps(car, b, theta, &starts, 1000)?;
            let p = dir.join("value_surface.csv");
            write_surface(&p, car, b, theta, Some(grid), cfg.output.surface)?;
            files.push(p);
            Some(OracleComparison::MountainCar {
                median_rel_error,
                visited_bins,
                goal_reached: steps.iter().filter(|&&k| k < 1000).count(),
                starts: starts.len(),
                steps,
            })
        }
        (System::Mdp(m), Arch::Tabular(t), Reference::Mdp { solution, .. }) => {
            let (h, q) = t.decode(theta);
            Some(OracleComparison::Mdp {
                eta_opt: solution.eta,
                eta_hat: m.norm.apply(&q),
                h_sup_error: sup(h.iter().zip(&solution.h).map(|(a, b)| a - b)),
                q_sup_error: sup(q.iter().flatten().zip(solution.q.iter().flatten()).map(|(a, b)| a - b)),
                greedy_agreement: (0..m.n_states())
                    .filter(|&x| optimal_input(&solution.q[x], argmin(&q[x])))
                    .count() as f64
                    / m.n_states() as f64,
            })
        }
        _ => None,
    };

    let a = arch.as_dyn();
    let summary = RunSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        system: sys.kind().into(),
        architecture: a.descriptor(),
        fingerprint: a.fingerprint(),
        algorithm: cfg.algorithm.name,
        samples,
        dim: a.dim(),
        updates: out.record.epochs.len(),
        status: out.record.status,
        kkt: out.record.kkt,
        final_terms: out.record.epochs.last().cloned(),
        strong_convexity: out.record.strong_convexity,
        warnings: out.record.warnings.clone(),
        oracle,
        files: {
            files.push(dir.join("summary.json"));
            files
        },
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// The record CSV, with a header even when no update was recorded.
fn write_record(record: &RunRecord, path: &Path) -> Result<()> {
    if record.epochs.is_empty() {
        std::fs::write(
            path,
            "epoch,batch,alpha,mu_j,be_loss,plus_loss,z_inf,z_min,z_plus_max,lambda_inf,theta_step,qp_iterations,wall_ms\n",
        )?;
        Ok(())
    } else {
        record.write_csv(path)
    }
}

fn run_sdp(cfg: &Config, l: &LqrSystem, q: &QuadBasis) -> Result<RunSummary> {
    let dirs = sphere_directions(l.n() + l.m(), cfg.algorithm.sdp_directions.max(1));
    let sol = lqr_sdp_gridded(l, &dirs, &SdpSettings {
        qp: cfg.algorithm.qp.clone(),
        ..SdpSettings::default()
    })?;
    let (_, mq) = lqr_q_matrices(&sol.m, l)?;
    let theta = q.encode(&mq, Some(&sol.m));
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut files = vec![dir.join("record.csv"), dir.join("theta.json")];
    write_record(&RunRecord::default(), &files[0])?;
    ThetaFile::new(q, &theta).save(&files[1])?;
    let m_opt = match reference(cfg)? {
        Reference::Lqr { riccati, .. } => riccati.m,
        _ => unreachable!("an lqr config yields an lqr reference"),
    };
    let mut warnings = Vec::new();
    if sol.min_eig < -1e-8 {
        warnings.push(format!("grid leaves λ_min(M^Q − Mᴶ) = {:e}", sol.min_eig));
    }
    files.push(dir.join("summary.json"));
    let summary = RunSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        system: "lqr".into(),
        architecture: q.descriptor(),
        fingerprint: q.fingerprint(),
        algorithm: AlgoName::LqrSdp,
        samples: sol.directions,
        dim: q.dim(),
        updates: 1,
        status: Some(QpStatus::Optimal),
        kkt: None,
        final_terms: None,
        strong_convexity: 0.0,
        warnings,
        oracle: Some(lqr_comparison(&sol.m, &m_opt)),
        files,
    };
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|e| e * e).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// `cvxq compare`: errors of `J^θ` against the reference, and the fraction of
/// points where the greedy input agrees with the optimal one. `grid` is
/// `[nz, nv]` for Mountain Car and `[points per axis]` for LQR; finite
/// systems use every state.
pub fn cmd_compare(config: &Path, theta_file: &Path, reference_file: &Path, grid: Option<&[usize]>) -> Result<CompareMetrics> {
    let cfg = Config::from_path(config)?;
    let sys = cfg.build_system()?;
    let arch = cfg.build_arch(&sys)?;
    let a = arch.as_dyn();
    let theta = ThetaFile::load(theta_file)?.theta_for(a)?;
    let reference = Reference::load_for(reference_file, &cfg)?;
    let mut errs = Vec::new();
    let mut agree = 0usize;
    match (&sys, &reference) {
        (System::Lqr(l), Reference::Lqr { riccati, .. }) => {
            let g = grid.and_then(|g| g.first().copied()).unwrap_or(11).max(2);
            let n = l.n();
            let total = g.pow(n as u32);
            for idx in 0..total {
                let x: Vec<f64> = (0..n)
                    .map(|i| -1.0 + 2.0 * ((idx / g.pow(i as u32)) % g) as f64 / (g - 1) as f64)
                    .collect();
                let xv = nalgebra::DVector::from_column_slice(&x);
                errs.push(a.psi_j(&x).dot(&theta) - (xv.transpose() * &riccati.m * &xv)[(0, 0)]);
                let u_opt = -(&riccati.gain * &xv);
                if let Ok((u, _)) = min_q(a, &theta, &x, &l.inputs(&x)) {
                    let scale = u_opt.amax().max(1.0);
                    if u.iter().zip(u_opt.iter()).all(|(p, q)| (p - q).abs() <= 1e-3 * scale) {
                        agree += 1;
                    }
                }
            }
        }
        (System::Finite(f), Reference::Finite { value, .. }) => {
            for x in 0..f.n_states() {
                let xs = FiniteSystem::state(x);
                errs.push(a.psi_j(&xs).dot(&theta) - value.j[x]);
                let (u, _) = min_q(a, &theta, &xs, &f.inputs(&xs))?;
                if optimal_input(&value.q[x], FiniteSystem::index(&u)) {
                    agree += 1;
                }
            }
        }
        (System::MountainCar(car), Reference::MountainCar { grid: gv, .. }) => {
            let size = match grid {
                Some([nz, nv, ..]) => [(*nz).max(2), (*nv).max(2)],
                _ => cfg.output.surface,
            };
            let inputs = MountainCar::input_list();
            for i in 0..size[0] {
                // nodes strictly left of the goal line
                let z = car.z_min + (car.z_goal - car.z_min) * i as f64 / size[0] as f64;
                for j in 0..size[1] {
                    let v = -car.v_bar + 2.0 * car.v_bar * j as f64 / (size[1] - 1) as f64;
                    let x = [z, v];
                    errs.push(a.psi_j(&x).dot(&theta) - gv.interpolate(&x));
                    let (u, _) = min_q(a, &theta, &x, &crate::env::InputSet::Finite(inputs.clone()))?;
                    if u == gv.greedy(&x) {
                        agree += 1;
                    }
                }
            }
        }
        (System::Mdp(m), Reference::Mdp { solution, .. }) => {
            for x in 0..m.n_states() {
                let xs = FiniteSystem::state(x);
                errs.push(a.psi_j(&xs).dot(&theta) - solution.h[x]);
                let q: Vec<f64> = (0..m.n_inputs()).map(|u| a.psi(&xs, &FiniteSystem::state(u)).dot(&theta)).collect();
                if optimal_input(&solution.q[x], argmin(&q)) {
                    agree += 1;
                }
            }
        }
        _ => return Err(Error::Config("reference does not match the system kind".into())),
    }
    Ok(CompareMetrics {
        schema_version: SUMMARY_SCHEMA_VERSION,
        fingerprint: a.fingerprint(),
        points: errs.len(),
        sup_error: sup(errs.iter().copied()),
        l2_error: rms(&errs),
        greedy_agreement: agree as f64 / errs.len().max(1) as f64,
    })
}

/// `cvxq residual`: the projected Bellman residual `f̄(θ)` on a trajectory.
pub fn cmd_residual(config: &Path, theta_file: &Path, traj_file: &Path, zeta: ZetaConfig) -> Result<ResidualOutput> {
    let cfg = Config::from_path(config)?;
    let sys = cfg.build_system()?;
    let arch = cfg.build_arch(&sys)?;
    let a = arch.as_dyn();
    let ctl = sys
        .control()
        .ok_or_else(|| Error::Config("residual needs a deterministic control system".into()))?;
    let theta = ThetaFile::load(theta_file)?.theta_for(a)?;
    let traj = Trajectory::read_csv(traj_file)?;
    let spec = zeta_spec(zeta, &arch)?;
    let report = residual_report(ctl, &traj, a, &theta, &spec, apply_discount(cfg.algorithm.discount)?, 1e6)?;
    Ok(ResidualOutput {
        schema_version: SUMMARY_SCHEMA_VERSION,
        fingerprint: a.fingerprint(),
        zeta,
        certified: report.norm_inf <= 1e-6,
        report,
    })
}
