use crate::algos::{AlgoConfig, Algorithm, ConstraintMode, StepSchedule};
use crate::approx::{Architecture, BinnedBasis, BinnedSpec, QuadBasis, Tabular, TabularForm};
use crate::env::{apply_discount, FiniteSystem, LqrSystem, MountainCar};
use crate::error::{Error, Result};
use crate::explore::ProbeSignal;
use crate::losses::{MuMeasure, PlusVariant, ZetaSpec};
use crate::mdpx::{CondExpMode, Mdp};
use crate::qpcore::QpSettings;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Experiment description: `[system]`, `[architecture]`, `[exploration]`,
/// `[algorithm]` and `[output]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: SystemConfig,
    pub architecture: ArchConfig,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    /// Matrices as lists of rows.
    Lqr {
        f: Vec<Vec<f64>>,
        g: Vec<Vec<f64>>,
        s: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
    },
    Finite {
        next: Vec<Vec<usize>>,
        cost: Vec<Vec<f64>>,
        equilibrium: (usize, usize),
    },
    MountainCar(MountainCar),
    Mdp(Mdp),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchConfig {
    Quadratic {
        #[serde(default = "yes")]
        value_block: bool,
    },
    Tabular {
        #[serde(default)]
        advantage: bool,
    },
    Binned(BinnedSpec),
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    /// `u = −Kx + ξ`, `k` as rows.
    LinearFeedback { k: Vec<Vec<f64>> },
    Relay { coord: usize, gain: f64 },
    Constant { u: Vec<f64> },
    ProbeIndexed {
        #[serde(default)]
        cycle: bool,
    },
    /// Every state-input pair once (finite systems).
    Exhaustive,
    /// Uniformly randomized inputs (MDPs).
    Uniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationConfig {
    /// Defaults per system: linear feedback `K = 0` (LQR), probe-indexed
    /// (finite), relay on velocity (Mountain Car), uniform (MDP).
    pub policy: Option<PolicyConfig>,
    pub probe: ProbeSignal,
    pub steps: usize,
    pub x0: Option<Vec<f64>>,
    /// Restart after this many steps; Mountain Car also restarts at the goal.
    pub restart_every: Option<usize>,
    /// Number of spread-out restart points (Mountain Car only).
    pub starts: usize,
    /// Read the trajectory from this CSV instead of simulating.
    pub trajectory: Option<PathBuf>,
    /// Only used for MDP sampling.
    pub seed: u64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            policy: None,
            probe: ProbeSignal::default(),
            steps: 1000,
            x0: None,
            restart_every: None,
            starts: 200,
            trajectory: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoName {
    Lpql,
    Cql,
    Bcql,
    PdBcql,
    Zap,
    Dqn,
    /// The LQR semidefinite program on a direction grid (no learning).
    LqrSdp,
}

impl AlgoName {
    pub fn algorithm(self) -> Option<Algorithm> {
        Some(match self {
            AlgoName::Lpql => Algorithm::Lpql,
            AlgoName::Cql => Algorithm::Cql,
            AlgoName::Bcql => Algorithm::Bcql,
            AlgoName::PdBcql => Algorithm::PdBcql,
            AlgoName::Zap => Algorithm::Zap,
            AlgoName::Dqn => Algorithm::Dqn,
            AlgoName::LqrSdp => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuConfig {
    /// Uniform over the visited states.
    Samples,
    /// Uniform over every state of a finite system or MDP.
    AllStates,
    /// Unit weights on the standard basis, so `⟨μ, xᵀMx⟩ = trace M`.
    StandardBasis,
    Points {
        points: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
    },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaConfig {
    Zero,
    PerSample,
    PerPair,
    Features,
    /// Binned basis: one constraint per indicator pattern of `ψ(x, u)`.
    BinPattern,
    /// Binned basis: one constraint per (bin of `x`, `u`).
    BinInput,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: AlgoName,
    pub kappa_be: f64,
    pub kappa_plus: f64,
    pub tol: f64,
    pub step: StepSchedule,
    pub batches: usize,
    pub epochs: Option<usize>,
    pub mode: ConstraintMode,
    pub plus_variant: PlusVariant,
    pub lambda_max: f64,
    pub zap_eta: f64,
    pub discount: f64,
    pub mu: MuConfig,
    pub zeta: ZetaConfig,
    pub zeta_plus: ZetaConfig,
    pub theta0: Option<Vec<f64>>,
    pub qp: QpSettings,
    /// Grid size for `lqr_sdp`.
    pub sdp_directions: usize,
    /// Conditional expectation used by MDP runs.
    pub cond_exp: CondExpMode,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        let d = AlgoConfig::default();
        AlgorithmConfig {
            name: AlgoName::Cql,
            kappa_be: d.kappa_be,
            kappa_plus: d.kappa_plus,
            tol: d.tol,
            step: d.step,
            batches: d.batches,
            epochs: d.epochs,
            mode: d.mode,
            plus_variant: d.plus_variant,
            lambda_max: d.lambda_max,
            zap_eta: d.zap_eta,
            discount: 1.0,
            mu: MuConfig::Samples,
            zeta: ZetaConfig::PerSample,
            zeta_plus: ZetaConfig::Zero,
            theta0: None,
            qp: d.qp,
            sdp_directions: 64,
            cond_exp: CondExpMode::Direct,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Reference file written by `cvxq oracle`; used when present.
    pub reference: Option<PathBuf>,
    /// Value-surface grid `[nz, nv]` (Mountain Car).
    pub surface: [usize; 2],
    pub write_trajectory: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            reference: None,
            surface: [60, 40],
            write_trajectory: true,
        }
    }
}

/// A validated system.
#[derive(Debug, Clone)]
pub enum System {
    Lqr(LqrSystem),
    Finite(FiniteSystem),
    MountainCar(MountainCar),
    Mdp(Mdp),
}

impl System {
    pub fn kind(&self) -> &'static str {
        match self {
            System::Lqr(_) => "lqr",
            System::Finite(_) => "finite",
            System::MountainCar(_) => "mountain_car",
            System::Mdp(_) => "mdp",
        }
    }
}

/// A validated architecture.
#[derive(Debug, Clone)]
pub enum Arch {
    Quadratic(QuadBasis),
    Tabular(Tabular),
    Binned(BinnedBasis),
}

impl Arch {
    pub fn as_dyn(&self) -> &dyn Architecture {
        match self {
            Arch::Quadratic(a) => a,
            Arch::Tabular(a) => a,
            Arch::Binned(a) => a,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(cfg_err(format!("{name} must be a non-empty rectangular list of rows")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

impl Config {
    /// Parses TOML, or JSON when the file name ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Config::parse(&text, json)
    }

    pub fn parse(text: &str, json: bool) -> Result<Config> {
        let cfg: Config = if json {
            serde_json::from_str(text).map_err(|e| cfg_err(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds every component once, so that a bad config fails before any output.
    pub fn validate(&self) -> Result<()> {
        let sys = self.build_system()?;
        let arch = self.build_arch(&sys)?;
        if self.algorithm.name != AlgoName::LqrSdp {
            self.algo_config(&sys, &arch, &[])?.validate().map_err(|e| cfg_err(e.to_string()))?;
        } else if !matches!(sys, System::Lqr(_)) {
            return Err(cfg_err("lqr_sdp needs an lqr system"));
        }
        self.check_exploration(&sys)?;
        if self.exploration.steps == 0 && self.exploration.trajectory.is_none() {
            return Err(cfg_err("exploration.steps must be positive"));
        }
        if self.output.surface.iter().any(|n| *n < 2) {
            return Err(cfg_err("output.surface needs at least two nodes per axis"));
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<System> {
        let wrap = |e: Error| cfg_err(format!("system: {e}"));
        Ok(match &self.system {
            SystemConfig::Lqr { f, g, s, r } => System::Lqr(
                LqrSystem::new(matrix(f, "F")?, matrix(g, "G")?, matrix(s, "S")?, matrix(r, "R")?).map_err(wrap)?,
            ),
            SystemConfig::Finite { next, cost, equilibrium } => {
                System::Finite(FiniteSystem::new(next.clone(), cost.clone(), *equilibrium).map_err(wrap)?)
            }
            SystemConfig::MountainCar(car) => {
                if !(car.z_min < car.z_goal && car.v_bar > 0.0) {
                    return Err(cfg_err("mountain car needs z_min < z_goal and v_bar > 0"));
                }
                System::MountainCar(car.clone())
            }
            SystemConfig::Mdp(m) => {
                m.validate().map_err(wrap)?;
                System::Mdp(m.clone())
            }
        })
    }

    pub fn build_arch(&self, sys: &System) -> Result<Arch> {
        let form = |advantage: bool| {
            if advantage {
                TabularForm::Advantage
            } else {
                TabularForm::Plain
            }
        };
        Ok(match (&self.architecture, sys) {
            (ArchConfig::Quadratic { value_block }, System::Lqr(l)) => {
                Arch::Quadratic(QuadBasis::new(l.n(), l.m(), *value_block))
            }
            (ArchConfig::Tabular { advantage }, System::Finite(f)) => Arch::Tabular(Tabular::new(f, form(*advantage))),
            (ArchConfig::Tabular { advantage }, System::Mdp(m)) => {
                Arch::Tabular(Tabular::unpinned(m.n_states(), m.n_inputs(), form(*advantage)))
            }
            (ArchConfig::Binned(spec), System::MountainCar(_)) => {
                if spec.nz < 2 || spec.nv < 5 || !(spec.z_min < spec.z_goal) || !(spec.v_bar > 0.0) {
                    return Err(cfg_err("binned basis needs nz ≥ 2, nv ≥ 5 and a non-empty box"));
                }
                Arch::Binned(BinnedBasis::new(spec.clone()))
            }
            (a, s) => {
                return Err(cfg_err(format!(
                    "architecture {} does not fit a {} system",
                    match a {
                        ArchConfig::Quadratic { .. } => "quadratic",
                        ArchConfig::Tabular { .. } => "tabular",
                        ArchConfig::Binned(_) => "binned",
                    },
                    s.kind()
                )))
            }
        })
    }

    fn check_exploration(&self, sys: &System) -> Result<()> {
        let ok = match (&self.exploration.policy, sys) {
            (None, _) => true,
            (Some(PolicyConfig::LinearFeedback { k }), System::Lqr(l)) => {
                let k = matrix(k, "exploration.policy.k")?;
                k.nrows() == l.m() && k.ncols() == l.n()
            }
            (Some(PolicyConfig::Relay { coord, .. }), System::MountainCar(_)) => *coord < 2,
            (Some(PolicyConfig::Constant { u }), System::Lqr(l)) => u.len() == l.m(),
            (Some(PolicyConfig::Constant { u }), System::MountainCar(_)) => u.len() == 1 && u[0].abs() == 1.0,
            (Some(PolicyConfig::Constant { u }), System::Finite(f)) => u.len() == 1 && (u[0] as usize) < f.n_inputs(),
            (Some(PolicyConfig::ProbeIndexed { .. }), System::Finite(_) | System::MountainCar(_)) => true,
            (Some(PolicyConfig::Exhaustive), System::Finite(_)) => true,
            (Some(PolicyConfig::Uniform), System::Mdp(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(cfg_err(format!("exploration policy does not fit a {} system", sys.kind())));
        }
        if let Some(x0) = &self.exploration.x0 {
            let want = match sys {
                System::Lqr(l) => l.n(),
                System::MountainCar(_) => 2,
                System::Finite(_) | System::Mdp(_) => 1,
            };
            if x0.len() != want {
                return Err(cfg_err(format!("exploration.x0 needs {want} coordinates")));
            }
        }
        if self.exploration.restart_every == Some(0) {
            return Err(cfg_err("exploration.restart_every must be positive"));
        }
        Ok(())
    }

    /// Algorithm settings; `states` feeds `μ = samples`.
    pub fn algo_config(&self, sys: &System, arch: &Arch, states: &[Vec<f64>]) -> Result<AlgoConfig> {
        let a = &self.algorithm;
        let algorithm = a.name.algorithm().ok_or_else(|| cfg_err("lqr_sdp has no learning settings"))?;
        if matches!(sys, System::Mdp(_)) && algorithm != Algorithm::Bcql {
            return Err(cfg_err("MDP runs support the bcql algorithm only"));
        }
        let mu = match &a.mu {
            MuConfig::Samples => MuMeasure::uniform(states),
            MuConfig::Zero => MuMeasure::zero(),
            MuConfig::StandardBasis => match sys {
                System::Lqr(l) => MuMeasure::standard_basis(l.n()),
                _ => return Err(cfg_err("mu = standard_basis needs an lqr system")),
            },
            MuConfig::AllStates => match sys {
                System::Finite(f) => MuMeasure::uniform(&(0..f.n_states()).map(FiniteSystem::state).collect::<Vec<_>>()),
                System::Mdp(m) => MuMeasure::uniform(&(0..m.n_states()).map(FiniteSystem::state).collect::<Vec<_>>()),
                _ => return Err(cfg_err("mu = all_states needs a finite system or an MDP")),
            },
            MuConfig::Points { points, weights } => {
                let w = match weights {
                    Some(w) if w.len() != points.len() => return Err(cfg_err("mu weights and points differ in length")),
                    Some(w) => w.clone(),
                    None => vec![1.0 / points.len().max(1) as f64; points.len()],
                };
                MuMeasure::weighted(points.iter().cloned().zip(w).collect()).map_err(|e| cfg_err(e.to_string()))?
            }
        };
        let criterion = apply_discount(a.discount).map_err(|e| cfg_err(e.to_string()))?;
        Ok(AlgoConfig {
            algorithm,
            kappa_be: a.kappa_be,
            kappa_plus: a.kappa_plus,
            tol: a.tol,
            step: a.step,
            batches: a.batches,
            epochs: a.epochs,
            mu,
            zeta: zeta_spec(a.zeta, arch)?,
            zeta_plus: zeta_spec(a.zeta_plus, arch)?,
            mode: a.mode,
            plus_variant: a.plus_variant,
            criterion,
            lambda_max: a.lambda_max,
            zap_eta: a.zap_eta,
            theta0: a.theta0.clone(),
            qp: a.qp.clone(),
            ..AlgoConfig::default()
        })
    }

    /// Short hash of the system section, stored in reference files.
    pub fn system_hash(&self) -> String {
        let text = serde_json::to_string(&(&self.system, self.algorithm.discount)).unwrap_or_default();
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

pub fn zeta_spec(z: ZetaConfig, arch: &Arch) -> Result<ZetaSpec> {
    Ok(match z {
        ZetaConfig::Zero => ZetaSpec::Zero,
        ZetaConfig::PerSample => ZetaSpec::PerSample,
        ZetaConfig::PerPair => ZetaSpec::PerPair,
        ZetaConfig::Features => ZetaSpec::Features,
        ZetaConfig::BinPattern | ZetaConfig::BinInput => {
            let Arch::Binned(b) = arch else {
                return Err(cfg_err("bin_pattern and bin_input need the binned architecture"));
            };
            let b = Arc::new(b.clone());
            if z == ZetaConfig::BinPattern {
                ZetaSpec::Grouped(Arc::new(move |x: &[f64], u: &[f64]| b.pattern_key(x, u)))
            } else {
                ZetaSpec::Grouped(Arc::new(move |x: &[f64], u: &[f64]| {
                    let bin = b.bin_index(x).map_or(b.d_j() as u64, |i| i as u64);
                    (bin << 1) | (u[0] > 0.0) as u64
                }))
            }
        }
    })
}
