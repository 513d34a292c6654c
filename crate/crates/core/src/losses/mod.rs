//! Temporal differences, batch Bellman-error losses and Galerkin vectors.
//!
//! Every loss is kept in closed quadratic form. With `Υ = ψ(x,u) − γψᴶ(x⁺)` the
//! temporal difference is `𝒟(θ) = c − Υᵀθ`, and over a window of length `r`
//!
//! ```text
//!   ℰ(θ) = (1/r) Σ 𝒟² = θᵀPθ + 2qᵀθ + k₀,   P = (1/r)ΣΥΥᵀ,  q = −(1/r)ΣcΥ,  k₀ = (1/r)Σc²
//!   z(θ) = (1/r) Σ 𝒟 ζ = h − Gθ
//!   z⁺(θ) = (1/r) Σ (J − Q) ζ⁺ = G⁺θ
//! ```
//!
//! Sums are divided by the window length.

mod zeta;

pub use zeta::{ZetaMap, ZetaSpec};

use crate::approx::{min_q, Architecture};
use crate::env::{ControlSystem, Criterion, InputSet};
use crate::error::{check_dim, Error, Result};
use crate::explore::Trajectory;
use crate::linalg::{csr_from_rows, csr_mul, SparseVec};
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use std::collections::HashMap;
use std::ops::Range;

/// Which positivity penalty to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlusVariant {
    /// `{J^θ(x) − Q^θ(x,u)}₊²`
    #[default]
    Q,
    /// `{J^θ(x) − Q̲^θ(x)}₊²`
    MinQ,
}

/// Weighted point set defining `⟨μ, J^θ⟩ = Σ wᵢ J^θ(xⁱ)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MuMeasure {
    pub points: Vec<(Vec<f64>, f64)>,
}

impl MuMeasure {
    pub fn uniform(points: &[Vec<f64>]) -> Self {
        let w = 1.0 / points.len().max(1) as f64;
        MuMeasure {
            points: points.iter().map(|x| (x.clone(), w)).collect(),
        }
    }

    pub fn weighted(points: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if points.iter().any(|(_, w)| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("μ weights must be positive".into()));
        }
        Ok(MuMeasure { points })
    }

    /// Unit weights on the standard basis of `ℝⁿ`, so `⟨μ, xᵀMx⟩ = trace(M)`.
    pub fn standard_basis(n: usize) -> Self {
        MuMeasure {
            points: (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    (e, 1.0)
                })
                .collect(),
        }
    }

    pub fn zero() -> Self {
        MuMeasure::default()
    }

    /// The vector `v` with `⟨μ, J^θ⟩ = vᵀθ`.
    pub fn vector<A: Architecture + ?Sized>(&self, arch: &A) -> DVector<f64> {
        let mut v = DVector::zeros(arch.dim());
        for (x, w) in &self.points {
            arch.psi_j(x).add_to(*w, &mut v);
        }
        v
    }
}

/// One temporal difference `𝒟(θ) = cost − upsilonᵀθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdRow {
    pub upsilon: SparseVec,
    pub cost: f64,
}

impl TdRow {
    pub fn new<A: Architecture + ?Sized>(arch: &A, x: &[f64], u: &[f64], c: f64, xn: &[f64], gamma: f64) -> Self {
        let upsilon = arch.psi(x, u).axpy(-gamma, &arch.psi_j(xn));
        TdRow { upsilon, cost: c }
    }

    pub fn td(&self, theta: &[f64]) -> f64 {
        self.cost - self.upsilon.dot(theta)
    }
}

/// `𝒟°(θ) = −Q^θ(x,u) + c + γJ^θ(x⁺)`.
pub fn td_overparam<A: Architecture + ?Sized>(
    arch: &A,
    theta: &[f64],
    x: &[f64],
    u: &[f64],
    c: f64,
    xn: &[f64],
    criterion: Criterion,
) -> Result<f64> {
    check_dim("theta", arch.dim(), theta.len())?;
    Ok(-arch.psi(x, u).dot(theta) + c + criterion.gamma * arch.psi_j(xn).dot(theta))
}

/// `𝒟(θ) = −Q^θ(x,u) + c + γQ̲^θ(x⁺)`.
#[allow(clippy::too_many_arguments)]
pub fn td_watkins<A: Architecture + ?Sized>(
    arch: &A,
    theta: &[f64],
    x: &[f64],
    u: &[f64],
    c: f64,
    xn: &[f64],
    inputs_next: &InputSet,
    criterion: Criterion,
) -> Result<f64> {
    check_dim("theta", arch.dim(), theta.len())?;
    let (_, qmin) = min_q(arch, theta, xn, inputs_next)?;
    Ok(-arch.psi(x, u).dot(theta) + c + criterion.gamma * qmin)
}

/// `{J − Q}₊²` rows: the penalty of one sample is `max_j {dⱼᵀθ}₊²`, weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct PlusRow {
    pub weight: f64,
    pub diffs: Vec<SparseVec>,
}

impl PlusRow {
    pub fn value(&self, theta: &[f64]) -> f64 {
        let v = self.diffs.iter().map(|d| d.dot(theta)).fold(0.0_f64, f64::max);
        self.weight * v * v
    }
}

/// Quadratic data for one batch window.
#[derive(Debug, Clone)]
pub struct BatchLossData {
    pub d: usize,
    /// Window length.
    pub r: usize,
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub k0: f64,
    /// Positivity penalty rows, deduplicated with accumulated weights.
    pub plus: Vec<PlusRow>,
    /// `z(θ) = h − Gθ`; row `i` belongs to global ζ-coordinate `zeta_ids[i]`.
    pub g: CsrMatrix<f64>,
    pub h: DVector<f64>,
    pub zeta_ids: Vec<usize>,
    /// `z⁺(θ) = G⁺θ`, rows tagged by `zeta_plus_ids`.
    pub g_plus: CsrMatrix<f64>,
    pub zeta_plus_ids: Vec<usize>,
    /// `⟨μ, J^θ⟩ = muᵀθ`.
    pub mu: DVector<f64>,
}

impl BatchLossData {
    /// `ℰ(θ)` from the quadratic form.
    pub fn be_loss(&self, theta: &DVector<f64>) -> f64 {
        theta.dot(&(&self.p * theta)) + 2.0 * self.q.dot(theta) + self.k0
    }

    pub fn plus_loss(&self, theta: &[f64]) -> f64 {
        self.plus.iter().map(|r| r.value(theta)).sum()
    }

    pub fn z(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.h - csr_mul(&self.g, theta)
    }

    pub fn z_plus(&self, theta: &DVector<f64>) -> DVector<f64> {
        csr_mul(&self.g_plus, theta)
    }

    pub fn mu_value(&self, theta: &DVector<f64>) -> f64 {
        self.mu.dot(theta)
    }

    /// Smallest eigenvalue of `P`; near zero means `ℰ` is not strongly convex.
    pub fn strong_convexity(&self) -> f64 {
        crate::linalg::min_eigenvalue(&self.p)
    }

    /// Assembles from precomputed rows. `zeta[k]` lists `(global id, weight)`
    /// for the Galerkin vector of row `k`, and `zeta_plus[k]` likewise for `z⁺`.
    /// `plus_diffs[k]` holds `J − Q(x, u′)` as linear forms, the sampled input
    /// first; they feed `z⁺` and, with `with_penalty`, the `{·}₊²` penalty.
    pub fn from_rows(
        d: usize,
        rows: &[TdRow],
        zeta: &[Vec<(usize, f64)>],
        plus_diffs: &[Vec<SparseVec>],
        zeta_plus: &[Vec<(usize, f64)>],
        with_penalty: bool,
        mu: DVector<f64>,
    ) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidParameter("empty batch window".into()));
        }
        let inv = 1.0 / r as f64;
        let mut p = DMatrix::zeros(d, d);
        let mut q = DVector::zeros(d);
        let mut k0 = 0.0;
        for row in rows {
            row.upsilon.add_outer_to(inv, &mut p);
            row.upsilon.add_to(-inv * row.cost, &mut q);
            k0 += inv * row.cost * row.cost;
        }

        let (g, h, zeta_ids) = galerkin(d, rows.iter().map(|r| (&r.upsilon, r.cost)), zeta, inv);

        let mut plus_map: HashMap<Vec<(usize, u64)>, usize> = HashMap::new();
        let mut plus: Vec<PlusRow> = Vec::new();
        for diffs in plus_diffs.iter().filter(|_| with_penalty) {
            if diffs.is_empty() || diffs.iter().all(|v| v.nnz() == 0) {
                continue;
            }
            let key: Vec<(usize, u64)> = diffs
                .iter()
                .enumerate()
                .flat_map(|(j, v)| v.iter().map(move |(i, x)| (j * d + i, x.to_bits())))
                .collect();
            match plus_map.get(&key) {
                Some(&i) => plus[i].weight += inv,
                None => {
                    plus_map.insert(key, plus.len());
                    plus.push(PlusRow {
                        weight: inv,
                        diffs: diffs.clone(),
                    });
                }
            }
        }

        // z⁺ = (1/r) Σ (J − Q) ζ⁺ with (J − Q)(θ) = diffᵀθ
        let mut acc: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        let mut order: Vec<usize> = Vec::new();
        for (k, zp) in zeta_plus.iter().enumerate() {
            let Some(diff) = plus_diffs.get(k).and_then(|v| v.first()) else {
                continue;
            };
            for &(id, w) in zp {
                if w < 0.0 {
                    return Err(Error::InvalidParameter("ζ⁺ entries must be non-negative".into()));
                }
                let e = acc.entry(id).or_insert_with(|| {
                    order.push(id);
                    Vec::new()
                });
                e.extend(diff.iter().map(|(i, v)| (i, inv * w * v)));
            }
        }
        order.sort_unstable();
        let plus_rows: Vec<SparseVec> = order
            .iter()
            .map(|id| SparseVec::from_pairs(d, acc.remove(id).unwrap_or_default()))
            .collect();
        let g_plus = csr_from_rows(d, &plus_rows);

        Ok(BatchLossData {
            d,
            r,
            p,
            q,
            k0,
            plus,
            g,
            h,
            zeta_ids,
            g_plus,
            zeta_plus_ids: order,
            mu,
        })
    }
}

/// `G`, `h` and row ids for `z = (1/r) Σ (c − Υᵀθ) ζ`.
fn galerkin<'a>(
    d: usize,
    rows: impl Iterator<Item = (&'a SparseVec, f64)>,
    zeta: &[Vec<(usize, f64)>],
    inv: f64,
) -> (CsrMatrix<f64>, DVector<f64>, Vec<usize>) {
    let mut acc: HashMap<usize, (Vec<(usize, f64)>, f64)> = HashMap::new();
    for (k, (ups, c)) in rows.enumerate() {
        let Some(zk) = zeta.get(k) else { continue };
        for &(id, w) in zk {
            if w == 0.0 {
                continue;
            }
            let e = acc.entry(id).or_default();
            e.0.extend(ups.iter().map(|(i, v)| (i, inv * w * v)));
            e.1 += inv * w * c;
        }
    }
    let mut ids: Vec<usize> = acc.keys().copied().collect();
    ids.sort_unstable();
    let mut g_rows = Vec::with_capacity(ids.len());
    let mut h = DVector::zeros(ids.len());
    for (r, id) in ids.iter().enumerate() {
        let (pairs, hv) = acc.remove(id).unwrap();
        g_rows.push(SparseVec::from_pairs(d, pairs));
        h[r] = hv;
    }
    (csr_from_rows(d, &g_rows), h, ids)
}

/// What to assemble for a window.
#[derive(Clone)]
pub struct LossSpec {
    pub criterion: Criterion,
    pub mu: MuMeasure,
    pub plus_variant: PlusVariant,
    /// Build positivity-penalty rows at all (skipped for cone architectures).
    pub with_plus: bool,
    pub zeta: ZetaMap,
    pub zeta_plus: ZetaMap,
}

/// Assembles the batch quadratic data for `traj[window]`.
pub fn assemble_batch<A, S>(
    arch: &A,
    sys: &S,
    traj: &Trajectory,
    window: Range<usize>,
    spec: &LossSpec,
) -> Result<BatchLossData>
where
    A: Architecture + ?Sized,
    S: ControlSystem + ?Sized,
{
    if window.is_empty() || window.end > traj.len() {
        return Err(Error::InvalidParameter(format!(
            "window {window:?} outside trajectory of length {}",
            traj.len()
        )));
    }
    let d = arch.dim();
    let gamma = spec.criterion.gamma;
    let mut rows = Vec::with_capacity(window.len());
    let mut zeta = Vec::with_capacity(window.len());
    let mut plus_diffs = Vec::with_capacity(window.len());
    let mut zeta_plus = Vec::with_capacity(window.len());
    for k in window.clone() {
        let (x, u, c, xn) = (&traj.states[k], &traj.inputs[k], traj.costs[k], &traj.next[k]);
        let psi = arch.psi(x, u);
        let psi_jx = arch.psi_j(x);
        rows.push(TdRow {
            upsilon: psi.axpy(-gamma, &arch.psi_j(xn)),
            cost: c,
        });
        zeta.push(spec.zeta.entries(arch, k, x, u));
        let diffs = if spec.with_plus || !spec.zeta_plus.is_zero() {
            match spec.plus_variant {
                PlusVariant::Q => vec![psi_jx.sub(&psi)],
                PlusVariant::MinQ => {
                    let mut v = vec![psi_jx.sub(&psi)];
                    if let InputSet::Finite(list) = sys.inputs(x) {
                        for w in list.iter().filter(|w| *w != u) {
                            v.push(psi_jx.sub(&arch.psi(x, w)));
                        }
                    } else {
                        return Err(Error::InvalidParameter(
                            "the Q̲ penalty variant needs finite inputs".into(),
                        ));
                    }
                    v
                }
            }
        } else {
            Vec::new()
        };
        plus_diffs.push(diffs);
        zeta_plus.push(spec.zeta_plus.entries(arch, k, x, u));
    }
    BatchLossData::from_rows(d, &rows, &zeta, &plus_diffs, &zeta_plus, spec.with_plus, spec.mu.vector(arch))
}

/// `(1/r) Σ {J − Q}₊²` (or with `Q̲`) by direct summation over the window.
pub fn eval_plus_penalty<A, S>(
    arch: &A,
    sys: &S,
    theta: &[f64],
    traj: &Trajectory,
    window: Range<usize>,
    variant: PlusVariant,
) -> Result<f64>
where
    A: Architecture + ?Sized,
    S: ControlSystem + ?Sized,
{
    check_dim("theta", arch.dim(), theta.len())?;
    if window.is_empty() {
        return Err(Error::InvalidParameter("empty window".into()));
    }
    let mut total = 0.0;
    for k in window.clone() {
        let x = &traj.states[k];
        let j = arch.psi_j(x).dot(theta);
        let q = match variant {
            PlusVariant::Q => arch.psi(x, &traj.inputs[k]).dot(theta),
            PlusVariant::MinQ => min_q(arch, theta, x, &sys.inputs(x))?.1,
        };
        total += (j - q).max(0.0).powi(2);
    }
    Ok(total / window.len() as f64)
}

/// `(1/r) Σ 𝒟°²` by direct summation.
pub fn eval_be_loss<A: Architecture + ?Sized>(
    arch: &A,
    theta: &[f64],
    traj: &Trajectory,
    window: Range<usize>,
    criterion: Criterion,
) -> Result<f64> {
    let mut total = 0.0;
    for k in window.clone() {
        let d = td_overparam(arch, theta, &traj.states[k], &traj.inputs[k], traj.costs[k], &traj.next[k], criterion)?;
        total += d * d;
    }
    Ok(total / window.len().max(1) as f64)
}

/// Equal windows `[T_n, T_{n+1})` covering `0..n`.
pub fn equal_windows(n: usize, batches: usize) -> Vec<Range<usize>> {
    let b = batches.clamp(1, n.max(1));
    (0..b).map(|i| (i * n / b)..((i + 1) * n / b)).filter(|r| !r.is_empty()).collect()
}
