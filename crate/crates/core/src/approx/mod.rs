//! Linear function classes `J^θ = θᵀψᴶ`, `Q^θ = θᵀψ`.

mod binned;
mod custom;
mod quad;
mod tabular;

pub use binned::{BinnedBasis, BinnedSpec};
pub use custom::FnBasis;
pub use quad::QuadBasis;
pub(crate) use quad::sym_from_tri;
pub use tabular::{Tabular, TabularForm};

use crate::env::{ControlSystem, InputSet};
use crate::error::{check_dim, Error, Result};
use crate::linalg::SparseVec;
use crate::qpcore::{solve_qp, QpSettings, QpStatus, QuadraticProgram};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Sign constraints attached to an architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    None,
    /// `θᵢ ≥ 0` for every `i ≥ d_j` (zero-based).
    AdvantageCone { d_j: usize },
    /// `Yθ ≤ 0`.
    Custom(DMatrix<f64>),
}

pub trait Architecture: Send + Sync {
    fn dim(&self) -> usize;
    fn psi_j(&self, x: &[f64]) -> SparseVec;
    fn psi(&self, x: &[f64], u: &[f64]) -> SparseVec;
    fn constraint(&self) -> ConstraintSpec {
        ConstraintSpec::None
    }
    /// Human-readable description of every choice that affects the features.
    fn descriptor(&self) -> String;

    /// Closed-form `(argmin, min)` of `Q^θ(x, ·)` over a continuum of inputs.
    fn min_q_closed_form(&self, _theta: &[f64], _x: &[f64]) -> Option<Result<(Vec<f64>, f64)>> {
        None
    }

    fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.descriptor().as_bytes());
        hex::encode(&digest[..8])
    }
}

impl<A: Architecture + ?Sized> Architecture for Box<A> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn psi_j(&self, x: &[f64]) -> SparseVec {
        (**self).psi_j(x)
    }
    fn psi(&self, x: &[f64], u: &[f64]) -> SparseVec {
        (**self).psi(x, u)
    }
    fn constraint(&self) -> ConstraintSpec {
        (**self).constraint()
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn min_q_closed_form(&self, theta: &[f64], x: &[f64]) -> Option<Result<(Vec<f64>, f64)>> {
        (**self).min_q_closed_form(theta, x)
    }
}

impl<A: Architecture + ?Sized> Architecture for &A {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn psi_j(&self, x: &[f64]) -> SparseVec {
        (**self).psi_j(x)
    }
    fn psi(&self, x: &[f64], u: &[f64]) -> SparseVec {
        (**self).psi(x, u)
    }
    fn constraint(&self) -> ConstraintSpec {
        (**self).constraint()
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn min_q_closed_form(&self, theta: &[f64], x: &[f64]) -> Option<Result<(Vec<f64>, f64)>> {
        (**self).min_q_closed_form(theta, x)
    }
}

pub fn eval_j<A: Architecture + ?Sized>(arch: &A, theta: &[f64], x: &[f64]) -> Result<f64> {
    check_dim("theta", arch.dim(), theta.len())?;
    Ok(arch.psi_j(x).dot(theta))
}

pub fn eval_q<A: Architecture + ?Sized>(arch: &A, theta: &[f64], x: &[f64], u: &[f64]) -> Result<f64> {
    check_dim("theta", arch.dim(), theta.len())?;
    Ok(arch.psi(x, u).dot(theta))
}

/// `(argmin_u Q^θ(x,u), Q̲^θ(x))`; ties go to the lowest input index.
pub fn min_q<A: Architecture + ?Sized>(
    arch: &A,
    theta: &[f64],
    x: &[f64],
    inputs: &InputSet,
) -> Result<(Vec<f64>, f64)> {
    check_dim("theta", arch.dim(), theta.len())?;
    if let Some(res) = arch.min_q_closed_form(theta, x) {
        return res;
    }
    match inputs {
        InputSet::Finite(list) => {
            let mut best: Option<(usize, f64)> = None;
            for (i, u) in list.iter().enumerate() {
                let v = arch.psi(x, u).dot(theta);
                if best.map_or(true, |(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
            let (i, v) = best.ok_or_else(|| Error::InvalidParameter("empty input set".into()))?;
            Ok((list[i].clone(), v))
        }
        InputSet::Box { .. } => Err(Error::InvalidParameter(
            "minimizing over a continuum of inputs needs a closed-form architecture".into(),
        )),
    }
}

/// `φ^θ(x) = argmin_u Q^θ(x, u)`.
pub fn greedy_policy<'a, A, S>(arch: &'a A, theta: &'a [f64], sys: &'a S) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a
where
    A: Architecture + ?Sized,
    S: ControlSystem + ?Sized,
{
    move |x: &[f64]| min_q(arch, theta, x, &sys.inputs(x)).map(|(u, _)| u)
}

/// Lower bounds describing an advantage cone (`-∞` where unconstrained).
pub fn cone_lower_bounds(spec: &ConstraintSpec, d: usize) -> DVector<f64> {
    match spec {
        ConstraintSpec::AdvantageCone { d_j } => {
            DVector::from_fn(d, |i, _| if i >= *d_j { 0.0 } else { f64::NEG_INFINITY })
        }
        _ => DVector::from_element(d, f64::NEG_INFINITY),
    }
}

/// Euclidean projection onto the constraint cone.
pub fn project_constraints<A: Architecture + ?Sized>(arch: &A, theta: &[f64]) -> Result<Vec<f64>> {
    check_dim("theta", arch.dim(), theta.len())?;
    match arch.constraint() {
        ConstraintSpec::None => Ok(theta.to_vec()),
        ConstraintSpec::AdvantageCone { d_j } => Ok(theta
            .iter()
            .enumerate()
            .map(|(i, v)| if i >= d_j { v.max(0.0) } else { *v })
            .collect()),
        ConstraintSpec::Custom(y) => {
            let d = theta.len();
            let v = DVector::from_column_slice(theta);
            if (&y * &v).iter().all(|r| *r <= 0.0) {
                return Ok(theta.to_vec());
            }
            let prob = QuadraticProgram::new(DMatrix::identity(d, d), -v).with_inequalities(
                crate::linalg::csr_from_dense(&y),
                DVector::zeros(y.nrows()),
            );
            let sol = solve_qp(&prob, &QpSettings::default())?;
            if sol.status != QpStatus::Optimal {
                return Err(Error::NonConvergence {
                    what: "cone projection",
                    iterations: sol.iterations,
                    residual: sol.kkt.max(),
                });
            }
            Ok(sol.theta.as_slice().to_vec())
        }
    }
}

pub const THETA_SCHEMA_VERSION: u32 = 1;

/// Serialized parameter vector tagged with its architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFile {
    pub schema_version: u32,
    pub architecture: String,
    pub fingerprint: String,
    pub theta: Vec<f64>,
}

impl ThetaFile {
    pub fn new<A: Architecture + ?Sized>(arch: &A, theta: &[f64]) -> Self {
        ThetaFile {
            schema_version: THETA_SCHEMA_VERSION,
            architecture: arch.descriptor(),
            fingerprint: arch.fingerprint(),
            theta: theta.to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The parameter vector, provided it was produced for `arch`.
    pub fn theta_for<A: Architecture + ?Sized>(&self, arch: &A) -> Result<Vec<f64>> {
        let fp = arch.fingerprint();
        if fp != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: fp,
                found: self.fingerprint.clone(),
            });
        }
        check_dim("stored theta", arch.dim(), self.theta.len())?;
        Ok(self.theta.clone())
    }
}
