use super::{Architecture, ConstraintSpec};
use crate::linalg::SparseVec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinnedSpec {
    pub nz: usize,
    pub nv: usize,
    pub z_min: f64,
    pub z_goal: f64,
    pub v_bar: f64,
    /// `x^Δ`; `None` means half a bin width in each coordinate.
    pub shift: Option<[f64; 2]>,
    /// Merge four bins at the goal edge and install three quadratics.
    pub enrichment: bool,
}

impl Default for BinnedSpec {
    fn default() -> Self {
        BinnedSpec {
            nz: 40,
            nv: 20,
            z_min: -1.2,
            z_goal: 0.5,
            v_bar: 0.07,
            shift: None,
            enrichment: true,
        }
    }
}

/// Indicator bins over the half plane `z < z_goal` plus shifted advantage blocks.
///
/// Coordinates: `[0, d_J)` value bins, `[d_J, 2d_J)` the `u = +1` advantage
/// block evaluated at `x + x^Δ`, `[2d_J, 3d_J)` the `u = −1` block at `x − x^Δ`.
/// The outermost bins extend to infinity, so the value bins partition the half
/// plane. With enrichment, the four last-column bins nearest `v = v̄` act as one
/// bin and their three spare slots hold
/// `(z_g − z)`, `(z_g − z)²` and `(z_g − z)(v + v̄)`, evaluated with `z ≤ z_g`
/// and `|v| ≤ v̄` so that they are non-negative and vanish at the goal edge.
#[derive(Debug, Clone)]
pub struct BinnedBasis {
    pub spec: BinnedSpec,
    pub shift: [f64; 2],
    wz: f64,
    wv: f64,
}

impl BinnedBasis {
    pub fn new(spec: BinnedSpec) -> Self {
        let wz = (spec.z_goal - spec.z_min) / spec.nz as f64;
        let wv = 2.0 * spec.v_bar / spec.nv as f64;
        let shift = spec.shift.unwrap_or([0.5 * wz, 0.5 * wv]);
        BinnedBasis { spec, shift, wz, wv }
    }

    pub fn d_j(&self) -> usize {
        self.spec.nz * self.spec.nv
    }

    pub fn bin_widths(&self) -> [f64; 2] {
        [self.wz, self.wv]
    }

    /// `(iz, iv)` of the bin containing `x`, or `None` at/after the goal edge.
    pub fn cell(&self, x: &[f64]) -> Option<(usize, usize)> {
        if !(x[0] < self.spec.z_goal) {
            return None;
        }
        let iz = ((x[0] - self.spec.z_min) / self.wz).floor();
        let iv = ((x[1] + self.spec.v_bar) / self.wv).floor();
        let iz = iz.clamp(0.0, (self.spec.nz - 1) as f64) as usize;
        let iv = iv.clamp(0.0, (self.spec.nv - 1) as f64) as usize;
        Some((iz, iv))
    }

    fn merged(&self, iz: usize, iv: usize) -> bool {
        self.spec.enrichment && iz == self.spec.nz - 1 && iv + 4 >= self.spec.nv
    }

    /// Slot of the merged bin and the three quadratic slots.
    fn enrichment_slots(&self) -> (usize, [usize; 3]) {
        let nz = self.spec.nz;
        let nv = self.spec.nv;
        let base = (nz - 1) * nv;
        (base + nv - 4, [base + nv - 3, base + nv - 2, base + nv - 1])
    }

    /// Index of the bin holding `x` (merged bins share one index).
    pub fn bin_index(&self, x: &[f64]) -> Option<usize> {
        let (iz, iv) = self.cell(x)?;
        if self.merged(iz, iv) {
            Some(self.enrichment_slots().0)
        } else {
            Some(iz * self.spec.nv + iv)
        }
    }

    /// Key shared by all pairs `(x, u)` whose indicator pattern in `ψ(x, u)`
    /// is the same: the bin of `x`, the bin of the shifted point and the sign of `u`.
    pub fn pattern_key(&self, x: &[f64], u: &[f64]) -> u64 {
        let none = self.d_j() as u64;
        let sign = if u[0] > 0.0 { 1.0 } else { -1.0 };
        let shifted = [x[0] + sign * self.shift[0], x[1] + sign * self.shift[1]];
        let b0 = self.bin_index(x).map_or(none, |b| b as u64);
        let b1 = self.bin_index(&shifted).map_or(none, |b| b as u64);
        ((b0 * (none + 1) + b1) << 1) | (u[0] > 0.0) as u64
    }

    /// Value features at `x` as `(slot, value)` pairs within `[0, d_J)`.
    fn value_pairs(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let Some(bin) = self.bin_index(x) else {
            return Vec::new();
        };
        let mut out = vec![(bin, 1.0)];
        if self.spec.enrichment {
            let (_, q) = self.enrichment_slots();
            let dz = (self.spec.z_goal - x[0]).max(0.0);
            let v = x[1].clamp(-self.spec.v_bar, self.spec.v_bar) + self.spec.v_bar;
            out.push((q[0], dz));
            out.push((q[1], dz * dz));
            out.push((q[2], dz * v));
        }
        out
    }

    /// Parameter vector with constant `J ≡ level` on the value bins (no
    /// quadratics) and every advantage coefficient equal to one.
    pub fn pathology_theta(&self, level: f64) -> Vec<f64> {
        let d_j = self.d_j();
        let mut theta = vec![0.0; 3 * d_j];
        for t in theta.iter_mut().take(d_j) {
            *t = level;
        }
        if self.spec.enrichment {
            for q in self.enrichment_slots().1 {
                theta[q] = 0.0;
            }
        }
        for t in theta.iter_mut().skip(d_j) {
            *t = 1.0;
        }
        if self.spec.enrichment {
            for q in self.enrichment_slots().1 {
                theta[d_j + q] = 0.0;
                theta[2 * d_j + q] = 0.0;
            }
        }
        theta
    }
}

impl Architecture for BinnedBasis {
    fn dim(&self) -> usize {
        3 * self.d_j()
    }

    fn psi_j(&self, x: &[f64]) -> SparseVec {
        SparseVec::from_pairs(self.dim(), self.value_pairs(x))
    }

    fn psi(&self, x: &[f64], u: &[f64]) -> SparseVec {
        let mut pairs = self.value_pairs(x);
        if x[0] < self.spec.z_goal {
            let d_j = self.d_j();
            let (sign, offset) = if u[0] > 0.0 { (1.0, d_j) } else { (-1.0, 2 * d_j) };
            let shifted = [x[0] + sign * self.shift[0], x[1] + sign * self.shift[1]];
            pairs.extend(self.value_pairs(&shifted).into_iter().map(|(i, v)| (offset + i, v)));
        }
        SparseVec::from_pairs(self.dim(), pairs)
    }

    fn constraint(&self) -> ConstraintSpec {
        ConstraintSpec::AdvantageCone { d_j: self.d_j() }
    }

    fn descriptor(&self) -> String {
        format!(
            "binned:nz={}:nv={}:z=[{},{}]:vbar={}:shift=[{},{}]:enrich={}",
            self.spec.nz,
            self.spec.nv,
            self.spec.z_min,
            self.spec.z_goal,
            self.spec.v_bar,
            self.shift[0],
            self.shift[1],
            self.spec.enrichment
        )
    }
}
