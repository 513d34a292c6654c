//! Learning algorithms: each epoch assembles the batch losses and solves one
//! convex program.

mod drivers;
mod epoch;
mod record;
mod residual;

pub(crate) use drivers::prox_iterations;
pub use drivers::{run, run_bcql, run_cql, run_dqn, run_lpql, run_pd_bcql, run_zap, RunOutput};
pub use epoch::EpochProgram;
pub use record::{EpochRecord, RunRecord};
pub use residual::{local_lipschitz, projected_bellman_residual, residual_report, ResidualReport};

use crate::env::Criterion;
use crate::error::{Error, Result};
use crate::losses::{MuMeasure, PlusVariant, ZetaSpec};
use crate::qpcore::QpSettings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Lpql,
    Cql,
    Bcql,
    PdBcql,
    Zap,
    Dqn,
}

/// How the Bellman-error and advantage constraints enter the program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Penalties only.
    #[default]
    Penalty,
    /// `z(θ) = 0` and `z⁺(θ) ≤ Tol`, plus the penalties.
    HardGalerkin,
    /// `z(θ) ≥ −Tol` with `Q ≥ J` left to the architecture's sign constraints;
    /// the positivity penalty is dropped.
    AdvantageCone,
}

/// Step sizes `αₙ` of the proximal term `(1/αₙ) ½ ‖θ − θₙ₋₁‖²`, `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `αₙ = α₁ / n`
    Harmonic { alpha1: f64 },
    Constant { alpha: f64 },
    /// No proximal term.
    Off,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Harmonic { alpha1: 1.0 }
    }
}

impl StepSchedule {
    pub fn alpha(&self, n: usize) -> f64 {
        match *self {
            StepSchedule::Harmonic { alpha1 } => alpha1 / n.max(1) as f64,
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::Off => f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Harmonic { alpha1 } => alpha1 > 0.0,
            StepSchedule::Constant { alpha } => alpha > 0.0,
            StepSchedule::Off => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("step sizes must be positive".into()))
        }
    }
}

/// Everything an algorithm run needs besides the data and the architecture.
#[derive(Debug, Clone)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub kappa_be: f64,
    pub kappa_plus: f64,
    pub tol: f64,
    pub step: StepSchedule,
    /// Number of equal batch windows `B`.
    pub batches: usize,
    /// Total number of updates; batch `n mod B` is used at update `n`.
    /// `None` means one pass (`B` updates).
    pub epochs: Option<usize>,
    pub mu: MuMeasure,
    pub zeta: ZetaSpec,
    /// Eligibility for `z⁺`; only used by LPQL and the hard-Galerkin mode.
    pub zeta_plus: ZetaSpec,
    pub mode: ConstraintMode,
    pub plus_variant: PlusVariant,
    pub criterion: Criterion,
    /// Upper bound on every multiplier in pd-BCQL.
    pub lambda_max: f64,
    /// Zap gain exponent: `βₙ = n^(−η)`.
    pub zap_eta: f64,
    /// Added to the Zap gain before each step to keep it positive definite.
    pub zap_ridge: f64,
    /// Ridge used when DQN's normal equations are singular.
    pub ridge: f64,
    /// Initial parameter; zero when `None`.
    pub theta0: Option<Vec<f64>>,
    pub keep_history: bool,
    pub qp: QpSettings,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        AlgoConfig {
            algorithm: Algorithm::Cql,
            kappa_be: 1.0,
            kappa_plus: 1.0,
            tol: 0.0,
            step: StepSchedule::default(),
            batches: 20,
            epochs: None,
            mu: MuMeasure::zero(),
            zeta: ZetaSpec::Zero,
            zeta_plus: ZetaSpec::Zero,
            mode: ConstraintMode::Penalty,
            plus_variant: PlusVariant::Q,
            criterion: Criterion::default(),
            lambda_max: 1e3,
            zap_eta: 0.85,
            zap_ridge: 1e-8,
            ridge: 1e-8,
            theta0: None,
            keep_history: true,
            qp: QpSettings::default(),
        }
    }
}

impl AlgoConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        AlgoConfig {
            algorithm,
            ..AlgoConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_be >= 0.0 && self.kappa_plus >= 0.0) {
            return Err(Error::InvalidParameter("κ weights must be non-negative".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("Tol must be non-negative".into()));
        }
        if self.batches == 0 {
            return Err(Error::InvalidParameter("at least one batch is needed".into()));
        }
        if !(self.lambda_max >= 0.0) {
            return Err(Error::InvalidParameter("λ_max must be non-negative".into()));
        }
        if !(self.zap_eta > 0.5 && self.zap_eta < 1.0) {
            return Err(Error::InvalidParameter(format!("Zap exponent {} outside (1/2, 1)", self.zap_eta)));
        }
        self.step.validate()
    }
}
