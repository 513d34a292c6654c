use super::{Architecture, ConstraintSpec};
use crate::env::FiniteSystem;
use crate::linalg::SparseVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TabularForm {
    /// Independent `J` and `Q` tables.
    Plain,
    /// `Q = J + A` with a non-negative advantage table.
    Advantage,
}

/// One parameter per non-equilibrium state for `J`, one per pair for `Q` (or `A`).
#[derive(Debug, Clone)]
pub struct Tabular {
    pub n_states: usize,
    pub n_inputs: usize,
    pub equilibrium: usize,
    pub form: TabularForm,
}

impl Tabular {
    pub fn new(sys: &FiniteSystem, form: TabularForm) -> Self {
        Tabular {
            n_states: sys.n_states(),
            n_inputs: sys.n_inputs(),
            equilibrium: sys.equilibrium.0,
            form,
        }
    }

    /// No state is pinned: `J` (a relative value) gets one parameter per state.
    pub fn unpinned(n_states: usize, n_inputs: usize, form: TabularForm) -> Self {
        Tabular {
            n_states,
            n_inputs,
            equilibrium: n_states,
            form,
        }
    }

    pub fn d_j(&self) -> usize {
        if self.equilibrium < self.n_states {
            self.n_states - 1
        } else {
            self.n_states
        }
    }

    pub fn j_index(&self, x: usize) -> Option<usize> {
        use std::cmp::Ordering::*;
        match x.cmp(&self.equilibrium) {
            Less => Some(x),
            Equal => None,
            Greater => Some(x - 1),
        }
    }

    pub fn q_index(&self, x: usize, u: usize) -> usize {
        self.d_j() + x * self.n_inputs + u
    }

    /// Parameter vector reproducing the tables `J` (per state) and `Q` (per pair).
    pub fn encode(&self, j: &[f64], q: &[Vec<f64>]) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim()];
        for x in 0..self.n_states {
            let jx = if x == self.equilibrium { 0.0 } else { j[x] };
            if let Some(i) = self.j_index(x) {
                theta[i] = jx;
            }
            for u in 0..self.n_inputs {
                theta[self.q_index(x, u)] = match self.form {
                    TabularForm::Plain => q[x][u],
                    TabularForm::Advantage => q[x][u] - jx,
                };
            }
        }
        theta
    }

    /// `(J, Q)` tables of a parameter vector.
    pub fn decode(&self, theta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let j: Vec<f64> = (0..self.n_states)
            .map(|x| self.j_index(x).map_or(0.0, |i| theta[i]))
            .collect();
        let q = (0..self.n_states)
            .map(|x| {
                (0..self.n_inputs)
                    .map(|u| {
                        let a = theta[self.q_index(x, u)];
                        match self.form {
                            TabularForm::Plain => a,
                            TabularForm::Advantage => a + j[x],
                        }
                    })
                    .collect()
            })
            .collect();
        (j, q)
    }
}

impl Architecture for Tabular {
    fn dim(&self) -> usize {
        self.d_j() + self.n_states * self.n_inputs
    }

    fn psi_j(&self, x: &[f64]) -> SparseVec {
        match self.j_index(FiniteSystem::index(x)) {
            Some(i) => SparseVec::unit(self.dim(), i),
            None => SparseVec::zeros(self.dim()),
        }
    }

    fn psi(&self, x: &[f64], u: &[f64]) -> SparseVec {
        let qi = self.q_index(FiniteSystem::index(x), FiniteSystem::index(u));
        let q = SparseVec::unit(self.dim(), qi);
        match self.form {
            TabularForm::Plain => q,
            TabularForm::Advantage => q.add(&self.psi_j(x)),
        }
    }

    fn constraint(&self) -> ConstraintSpec {
        match self.form {
            TabularForm::Plain => ConstraintSpec::None,
            TabularForm::Advantage => ConstraintSpec::AdvantageCone { d_j: self.d_j() },
        }
    }

    fn descriptor(&self) -> String {
        format!(
            "tabular:{:?}:states={}:inputs={}:eq={}",
            self.form, self.n_states, self.n_inputs, self.equilibrium
        )
    }
}
