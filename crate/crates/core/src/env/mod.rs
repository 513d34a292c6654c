//! Deterministic control systems `x⁺ = F(x, u)` with non-negative cost, and the
//! transformations that turn discounted, shortest-path and finite-horizon
//! criteria into the total-cost form used everywhere else.

mod finite;
mod lqr;
mod mountain_car;
mod transform;

pub use finite::FiniteSystem;
pub use lqr::LqrSystem;
pub use mountain_car::MountainCar;
pub use transform::{apply_discount, to_total_cost_finite_horizon, to_total_cost_spp, Criterion, FiniteHorizon, Spp};

use crate::error::{check_dim, Error, Result};

/// Admissible inputs at a state.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSet {
    Finite(Vec<Vec<f64>>),
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl InputSet {
    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            InputSet::Finite(list) => list.iter().any(|v| v.as_slice() == u),
            InputSet::Box { lo, hi } => {
                u.len() == lo.len() && u.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| *l <= *x && *x <= *h)
            }
        }
    }

    pub fn finite(&self) -> Option<&[Vec<f64>]> {
        match self {
            InputSet::Finite(list) => Some(list),
            InputSet::Box { .. } => None,
        }
    }
}

pub trait ControlSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// `F(x, u)` without admissibility checks.
    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
    fn cost(&self, x: &[f64], u: &[f64]) -> f64;
    /// `(xᵉ, uᵉ)` with `F(xᵉ, uᵉ) = xᵉ` and `c(xᵉ, uᵉ) = 0`.
    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>);
    fn inputs(&self, x: &[f64]) -> InputSet;

    /// `F(x, u)` after checking dimensions and admissibility.
    fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        check_dim("state", self.state_dim(), x.len())?;
        check_dim("input", self.input_dim(), u.len())?;
        if !self.inputs(x).contains(u) {
            return Err(Error::InadmissibleInput {
                state: x.to_vec(),
                input: u.to_vec(),
            });
        }
        Ok(self.dynamics(x, u))
    }
}

impl<S: ControlSystem + ?Sized> ControlSystem for Box<S> {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (**self).dynamics(x, u)
    }
    fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        (**self).cost(x, u)
    }
    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).equilibrium()
    }
    fn inputs(&self, x: &[f64]) -> InputSet {
        (**self).inputs(x)
    }
}

impl<S: ControlSystem + ?Sized> ControlSystem for std::sync::Arc<S> {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (**self).dynamics(x, u)
    }
    fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        (**self).cost(x, u)
    }
    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).equilibrium()
    }
    fn inputs(&self, x: &[f64]) -> InputSet {
        (**self).inputs(x)
    }
}

impl<S: ControlSystem + ?Sized> ControlSystem for &S {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (**self).dynamics(x, u)
    }
    fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        (**self).cost(x, u)
    }
    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (**self).equilibrium()
    }
    fn inputs(&self, x: &[f64]) -> InputSet {
        (**self).inputs(x)
    }
}

/// Convenience free function mirroring [`ControlSystem::step`].
pub fn step<S: ControlSystem + ?Sized>(sys: &S, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    sys.step(x, u)
}
