use super::{ControlSystem, InputSet};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Explicit transition and cost tables over `{0..n_states} × {0..n_inputs}`.
///
/// States and inputs are encoded as one-element vectors holding the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSystem {
    /// `next[x][u]`
    pub next: Vec<Vec<usize>>,
    /// `cost[x][u]`
    pub cost: Vec<Vec<f64>>,
    pub equilibrium: (usize, usize),
    /// Original state vectors when the table was built by [`FiniteSystem::tabulate`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_labels: Option<Vec<Vec<f64>>>,
}

impl FiniteSystem {
    pub fn new(next: Vec<Vec<usize>>, cost: Vec<Vec<f64>>, equilibrium: (usize, usize)) -> Result<Self> {
        let sys = FiniteSystem {
            next,
            cost,
            equilibrium,
            labels: None,
            input_labels: None,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.next.len();
        if n == 0 {
            return Err(Error::InvalidParameter("finite system has no states".into()));
        }
        let m = self.next[0].len();
        if m == 0 {
            return Err(Error::InvalidParameter("finite system has no inputs".into()));
        }
        if self.cost.len() != n {
            return Err(Error::InvalidParameter("cost table row count differs from transition table".into()));
        }
        for x in 0..n {
            if self.next[x].len() != m || self.cost[x].len() != m {
                return Err(Error::InvalidParameter(format!("state {x} does not list {m} inputs")));
            }
            for u in 0..m {
                if self.next[x][u] >= n {
                    return Err(Error::InvalidParameter(format!(
                        "successor {} of ({x},{u}) out of range",
                        self.next[x][u]
                    )));
                }
                let c = self.cost[x][u];
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(Error::InvalidParameter(format!("cost at ({x},{u}) is {c}")));
                }
            }
        }
        let (xe, ue) = self.equilibrium;
        if xe >= n || ue >= m {
            return Err(Error::InvalidParameter("equilibrium out of range".into()));
        }
        if self.next[xe][ue] != xe || self.cost[xe][ue] != 0.0 {
            return Err(Error::InvalidParameter(
                "equilibrium pair must be a zero-cost fixed point".into(),
            ));
        }
        Ok(())
    }

    /// Three-state chain `2 → 1 → 0` with unit step cost; input 1 stays put.
    pub fn chain3() -> FiniteSystem {
        FiniteSystem::new(
            vec![vec![0, 0], vec![0, 1], vec![1, 2]],
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]],
            (0, 0),
        )
        .expect("valid table")
    }

    pub fn n_states(&self) -> usize {
        self.next.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.next[0].len()
    }

    pub fn state(i: usize) -> Vec<f64> {
        vec![i as f64]
    }

    pub fn index(x: &[f64]) -> usize {
        x[0] as usize
    }

    /// All `(x, u)` pairs in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.n_inputs();
        (0..self.n_states()).flat_map(move |x| (0..m).map(move |u| (x, u)))
    }

    pub fn pair_index(&self, x: usize, u: usize) -> usize {
        x * self.n_inputs() + u
    }

    /// Enumerates the states reachable from `starts` (plus the equilibrium) of a
    /// system with a fixed finite input list.
    pub fn tabulate<S: ControlSystem + ?Sized>(sys: &S, starts: &[Vec<f64>]) -> Result<FiniteSystem> {
        let (xe, ue) = sys.equilibrium();
        let inputs = match sys.inputs(&xe) {
            InputSet::Finite(list) => list,
            InputSet::Box { .. } => {
                return Err(Error::InvalidParameter("tabulate needs finite inputs".into()))
            }
        };
        let ue_idx = inputs
            .iter()
            .position(|u| *u == ue)
            .ok_or_else(|| Error::InvalidParameter("equilibrium input not in input list".into()))?;
        let key = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut labels: Vec<Vec<f64>> = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        for x in std::iter::once(&xe).chain(starts.iter()) {
            if !index.contains_key(&key(x)) {
                index.insert(key(x), labels.len());
                labels.push(x.clone());
                queue.push_back(x.clone());
            }
        }
        let mut next: Vec<Vec<usize>> = Vec::new();
        let mut cost: Vec<Vec<f64>> = Vec::new();
        while let Some(x) = queue.pop_front() {
            let here = sys.inputs(&x);
            if here.finite() != Some(inputs.as_slice()) {
                return Err(Error::InvalidParameter(
                    "tabulate needs the same input list at every state".into(),
                ));
            }
            let mut row = Vec::with_capacity(inputs.len());
            let mut crow = Vec::with_capacity(inputs.len());
            for u in &inputs {
                let y = sys.dynamics(&x, u);
                let j = match index.get(&key(&y)) {
                    Some(j) => *j,
                    None => {
                        let j = labels.len();
                        index.insert(key(&y), j);
                        labels.push(y.clone());
                        queue.push_back(y);
                        j
                    }
                };
                row.push(j);
                crow.push(sys.cost(&x, u));
            }
            next.push(row);
            cost.push(crow);
        }
        let mut out = FiniteSystem::new(next, cost, (0, ue_idx))?;
        out.labels = Some(labels);
        out.input_labels = Some(inputs);
        Ok(out)
    }
}

impl ControlSystem for FiniteSystem {
    fn state_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        Self::state(self.next[Self::index(x)][Self::index(u)])
    }

    fn cost(&self, x: &[f64], u: &[f64]) -> f64 {
        self.cost[Self::index(x)][Self::index(u)]
    }

    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (Self::state(self.equilibrium.0), Self::state(self.equilibrium.1))
    }

    fn inputs(&self, x: &[f64]) -> InputSet {
        let _ = x;
        InputSet::Finite((0..self.n_inputs()).map(Self::state).collect())
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let ok_x = x.len() == 1 && x[0] >= 0.0 && x[0].fract() == 0.0 && (x[0] as usize) < self.n_states();
        let ok_u = u.len() == 1 && u[0] >= 0.0 && u[0].fract() == 0.0 && (u[0] as usize) < self.n_inputs();
        if !(ok_x && ok_u) {
            return Err(Error::InadmissibleInput {
                state: x.to_vec(),
                input: u.to_vec(),
            });
        }
        Ok(self.dynamics(x, u))
    }
}

