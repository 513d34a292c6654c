use crate::error::Result;
use crate::qpcore::{KktResiduals, QpStatus};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Diagnostics of one update, evaluated on its batch at the new parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub batch: usize,
    pub alpha: f64,
    /// `⟨μ, J^θ⟩`
    pub mu_j: f64,
    pub be_loss: f64,
    pub plus_loss: f64,
    /// `‖z(θ)‖∞`
    pub z_inf: f64,
    /// `min_i z(θ)ᵢ`; negative values violate `z ≥ 0`.
    pub z_min: f64,
    /// `max_i z⁺(θ)ᵢ`
    pub z_plus_max: f64,
    pub lambda_inf: f64,
    /// `‖θₙ₊₁ − θₙ‖∞`
    pub theta_step: f64,
    pub qp_iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub epochs: Vec<EpochRecord>,
    /// `θ₀, θ₁, …` when history is kept.
    pub thetas: Vec<Vec<f64>>,
    pub lambdas: Vec<Vec<f64>>,
    /// Status and KKT residuals of the last program solved.
    pub status: Option<QpStatus>,
    pub kkt: Option<KktResiduals>,
    /// Smallest eigenvalue of the pooled `ℰ` Hessian over 2.
    pub strong_convexity: f64,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.epochs {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Equality ignoring wall-clock times.
    pub fn same_numbers(&self, other: &RunRecord) -> bool {
        let strip = |r: &RunRecord| {
            r.epochs
                .iter()
                .map(|e| EpochRecord { wall_ms: 0.0, ..e.clone() })
                .collect::<Vec<_>>()
        };
        strip(self) == strip(other) && self.thetas == other.thetas && self.lambdas == other.lambdas
    }

    pub(crate) fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}
