use crate::env::InputSet;
use nalgebra::{DMatrix, DVector};

/// `u(k) = φ(x(k), ξ(k))`. Implementations must return an admissible input.
pub trait ExplorationPolicy: Send + Sync {
    fn input(&self, x: &[f64], xi: &[f64], k: usize, inputs: &InputSet) -> Vec<f64>;
}

impl<F> ExplorationPolicy for F
where
    F: Fn(&[f64], &[f64], usize, &InputSet) -> Vec<f64> + Send + Sync,
{
    fn input(&self, x: &[f64], xi: &[f64], k: usize, inputs: &InputSet) -> Vec<f64> {
        self(x, xi, k, inputs)
    }
}

/// Always the same input.
#[derive(Debug, Clone)]
pub struct Constant(pub Vec<f64>);

impl ExplorationPolicy for Constant {
    fn input(&self, _x: &[f64], _xi: &[f64], _k: usize, _inputs: &InputSet) -> Vec<f64> {
        self.0.clone()
    }
}

/// `u = +1` if `x[coord] + gain·ξ₀ >= 0`, else `-1`.
#[derive(Debug, Clone)]
pub struct Relay {
    pub coord: usize,
    pub gain: f64,
}

impl ExplorationPolicy for Relay {
    fn input(&self, x: &[f64], xi: &[f64], _k: usize, _inputs: &InputSet) -> Vec<f64> {
        if x[self.coord] + self.gain * xi[0] >= 0.0 {
            vec![1.0]
        } else {
            vec![-1.0]
        }
    }
}

/// `u = −Kx + ξ` for box inputs (clamped to the box).
#[derive(Debug, Clone)]
pub struct LinearFeedback {
    pub k: DMatrix<f64>,
}

impl ExplorationPolicy for LinearFeedback {
    fn input(&self, x: &[f64], xi: &[f64], _k: usize, inputs: &InputSet) -> Vec<f64> {
        let u = -(&self.k * DVector::from_column_slice(x));
        let mut out: Vec<f64> = u.iter().enumerate().map(|(i, v)| v + xi.get(i).copied().unwrap_or(0.0)).collect();
        if let InputSet::Box { lo, hi } = inputs {
            for (i, v) in out.iter_mut().enumerate() {
                *v = v.clamp(lo[i], hi[i]);
            }
        }
        out
    }
}

/// Picks from a finite input list using the probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeIndexed {
    /// `ξ₀ ∈ [-1, 1]` split into equal slices, one per input.
    #[default]
    Quantize,
    /// `ξ₀ = k` from an enumerating probe; input `k mod m`.
    Cycle,
}

impl ExplorationPolicy for ProbeIndexed {
    fn input(&self, _x: &[f64], xi: &[f64], _k: usize, inputs: &InputSet) -> Vec<f64> {
        let list = inputs.finite().expect("probe-indexed policy needs finite inputs");
        let m = list.len();
        let i = match self {
            ProbeIndexed::Cycle => (xi[0].max(0.0) as usize) % m,
            ProbeIndexed::Quantize => {
                let t = ((xi[0] + 1.0) / 2.0).clamp(0.0, 1.0 - 1e-12);
                (t * m as f64) as usize
            }
        };
        list[i.min(m - 1)].clone()
    }
}

/// Greedy policy perturbed with probability `epsilon` using the probe as the
/// coin. Experimental: closed-loop stability of this scheme is not guaranteed.
pub struct EpsilonGreedy<G> {
    pub greedy: G,
    pub epsilon: f64,
}

impl<G> ExplorationPolicy for EpsilonGreedy<G>
where
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn input(&self, x: &[f64], xi: &[f64], k: usize, inputs: &InputSet) -> Vec<f64> {
        let coin = (0.5 * (xi[0] + 1.0)).clamp(0.0, 1.0);
        if coin < self.epsilon {
            if let Some(list) = inputs.finite() {
                let golden = 0.618_033_988_749_894_9 * (k as f64 + 1.0);
                let idx = ((golden.fract()) * list.len() as f64) as usize;
                return list[idx.min(list.len() - 1)].clone();
            }
        }
        (self.greedy)(x)
    }
}
