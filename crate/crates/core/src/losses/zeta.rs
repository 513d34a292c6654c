use crate::approx::Architecture;
use crate::explore::Trajectory;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub type GroupKey = Arc<dyn Fn(&[f64], &[f64]) -> u64 + Send + Sync>;

/// How the eligibility vectors `ζₖ` are chosen.
#[derive(Clone)]
pub enum ZetaSpec {
    /// No constraints.
    Zero,
    /// `ζₖ(i) = 1{k = i}`: one constraint per observation.
    PerSample,
    /// `ζₖ(i) = 1{(x(k), u(k)) = (xⁱ, uⁱ)}` over distinct observed pairs.
    PerPair,
    /// `ζₖ = ψ(x(k), u(k))`.
    Features,
    /// Indicator of a user-defined cell of `(x, u)`.
    Grouped(GroupKey),
}

impl fmt::Debug for ZetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZetaSpec::Zero => write!(f, "Zero"),
            ZetaSpec::PerSample => write!(f, "PerSample"),
            ZetaSpec::PerPair => write!(f, "PerPair"),
            ZetaSpec::Features => write!(f, "Features"),
            ZetaSpec::Grouped(_) => write!(f, "Grouped(..)"),
        }
    }
}

/// A [`ZetaSpec`] resolved against a trajectory, with globally consistent ids.
#[derive(Debug, Clone)]
pub enum ZetaMap {
    Zero,
    Features,
    Groups { of_sample: Vec<usize>, count: usize },
}

impl ZetaSpec {
    pub fn resolve(&self, traj: &Trajectory) -> ZetaMap {
        let by_key = |key: &dyn Fn(usize) -> Vec<u64>| {
            let mut ids: HashMap<Vec<u64>, usize> = HashMap::new();
            let of_sample: Vec<usize> = (0..traj.len())
                .map(|k| {
                    let n = ids.len();
                    *ids.entry(key(k)).or_insert(n)
                })
                .collect();
            ZetaMap::Groups {
                of_sample,
                count: ids.len(),
            }
        };
        match self {
            ZetaSpec::Zero => ZetaMap::Zero,
            ZetaSpec::Features => ZetaMap::Features,
            ZetaSpec::PerSample => ZetaMap::Groups {
                of_sample: (0..traj.len()).collect(),
                count: traj.len(),
            },
            ZetaSpec::PerPair => by_key(&|k| {
                traj.states[k]
                    .iter()
                    .chain(&traj.inputs[k])
                    .map(|v| v.to_bits())
                    .collect()
            }),
            ZetaSpec::Grouped(f) => by_key(&|k| vec![f(&traj.states[k], &traj.inputs[k])]),
        }
    }
}

impl ZetaMap {
    pub fn is_zero(&self) -> bool {
        matches!(self, ZetaMap::Zero)
    }

    /// Number of ζ coordinates (`None` for feature eligibility: it is `d`).
    pub fn count(&self) -> Option<usize> {
        match self {
            ZetaMap::Zero => Some(0),
            ZetaMap::Features => None,
            ZetaMap::Groups { count, .. } => Some(*count),
        }
    }

    pub fn dim<A: Architecture + ?Sized>(&self, arch: &A) -> usize {
        self.count().unwrap_or_else(|| arch.dim())
    }

    /// Non-zero entries of `ζₖ`.
    pub fn entries<A: Architecture + ?Sized>(&self, arch: &A, k: usize, x: &[f64], u: &[f64]) -> Vec<(usize, f64)> {
        match self {
            ZetaMap::Zero => Vec::new(),
            ZetaMap::Features => arch.psi(x, u).iter().collect(),
            ZetaMap::Groups { of_sample, .. } => vec![(of_sample[k], 1.0)],
        }
    }
}
