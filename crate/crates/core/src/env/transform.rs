use super::{ControlSystem, InputSet};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Optimality criterion seen by the losses: `Q = c + γ J∘F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub gamma: f64,
}

impl Default for Criterion {
    fn default() -> Self {
        Criterion { gamma: 1.0 }
    }
}

impl Criterion {
    pub fn total_cost() -> Self {
        Criterion::default()
    }
}

/// Discounted criterion. `γ = 1` is total cost and `γ = 0` keeps only the stage cost.
pub fn apply_discount(gamma: f64) -> Result<Criterion> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "discount factor {gamma} outside [0, 1]"
        )));
    }
    Ok(Criterion { gamma })
}

type StatePredicate = Box<dyn Fn(&[f64]) -> bool + Send + Sync>;
type StateCost = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Shortest-path problem recast as total cost: the state gains a trailing flag
/// that is `1` in the absorbing zero-cost graveyard.
pub struct Spp<S> {
    pub inner: S,
    target: StatePredicate,
    terminal: StateCost,
    pub criterion: Criterion,
}

pub fn to_total_cost_spp<S: ControlSystem>(
    inner: S,
    target: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
    terminal: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    gamma: f64,
) -> Result<Spp<S>> {
    Ok(Spp {
        inner,
        target: Box::new(target),
        terminal: Box::new(terminal),
        criterion: apply_discount(gamma)?,
    })
}

impl<S: ControlSystem> Spp<S> {
    pub fn graveyard(&self) -> Vec<f64> {
        let mut g = self.inner.equilibrium().0;
        g.push(1.0);
        g
    }

    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        v.push(0.0);
        v
    }

    pub fn is_graveyard(&self, x: &[f64]) -> bool {
        x[x.len() - 1] != 0.0
    }

    fn base<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..x.len() - 1]
    }
}

impl<S: ControlSystem> ControlSystem for Spp<S> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim() + 1
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        if self.is_graveyard(x) || (self.target)(self.base(x)) {
            return self.graveyard();
        }
        self.lift(&self.inner.dynamics(self.base(x), u))
    }

    fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        if self.is_graveyard(x) {
            0.0
        } else if (self.target)(self.base(x)) {
            (self.terminal)(self.base(x))
        } else {
            self.inner.cost(self.base(x), u)
        }
    }

    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (self.graveyard(), self.inner.equilibrium().1)
    }

    fn inputs(&self, x: &[f64]) -> InputSet {
        if self.is_graveyard(x) {
            self.inner.inputs(&self.inner.equilibrium().0)
        } else {
            self.inner.inputs(self.base(x))
        }
    }
}

/// Finite-horizon criterion recast as total cost by appending a clock.
///
/// The clock saturates at `K + 1`, where every cost vanishes, so finite
/// systems stay finite after the transformation.
pub struct FiniteHorizon<S> {
    pub inner: S,
    pub horizon: usize,
}

pub fn to_total_cost_finite_horizon<S: ControlSystem>(inner: S, horizon: usize) -> Result<FiniteHorizon<S>> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    Ok(FiniteHorizon { inner, horizon })
}

impl<S: ControlSystem> FiniteHorizon<S> {
    pub fn at_clock(&self, x: &[f64], clock: usize) -> Vec<f64> {
        let mut v = x.to_vec();
        v.push(clock.min(self.horizon + 1) as f64);
        v
    }

    pub fn clock(&self, x: &[f64]) -> usize {
        x[x.len() - 1] as usize
    }
}

impl<S: ControlSystem> ControlSystem for FiniteHorizon<S> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim() + 1
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let k = self.clock(x);
        let base = &x[..x.len() - 1];
        self.at_clock(&self.inner.dynamics(base, u), k + 1)
    }

    fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        if self.clock(x) > self.horizon {
            0.0
        } else {
            self.inner.cost(&x[..x.len() - 1], u)
        }
    }

    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        let (xe, ue) = self.inner.equilibrium();
        (self.at_clock(&xe, self.horizon + 1), ue)
    }

    fn inputs(&self, x: &[f64]) -> InputSet {
        self.inner.inputs(&x[..x.len() - 1])
    }
}
