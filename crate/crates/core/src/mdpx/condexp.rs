use super::{check_policy, Mdp};
use crate::error::{check_dim, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One observed step of an MDP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x: usize,
    pub u: usize,
    pub cost: f64,
    pub next: usize,
}

/// How `h_{k+1|k} = E[h(X(k+1)) | X(k), U(k)]` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CondExpMode {
    /// Sum against the model `P_u(x, ·)`.
    #[default]
    Direct,
    /// Sum against the successor histogram of `(x, u)`.
    EmpiricalPmf,
    /// Least squares over the span of features `h₁..h_{d_G}` of `(x, u)`.
    Galerkin,
    /// `h(X(k+1))` itself.
    PretendDeterministic,
}

/// Least-squares fit `α° = A⁻¹b` of one function.
#[derive(Debug, Clone)]
pub struct GalerkinFit {
    pub alpha: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `maxᵢ |E[(Z − h°(Y)) hᵢ(Y)]|` over the samples.
    pub orthogonality: f64,
    /// `A` was rank deficient and the least-norm solution was used.
    pub singular: bool,
}

/// Conditional-expectation estimator. Sample tables are append-only.
#[derive(Debug, Clone)]
pub struct CondExp {
    pub mode: CondExpMode,
    n_states: usize,
    n_inputs: usize,
    model: Option<Vec<Vec<Vec<f64>>>>,
    /// `[pair][x′]` successor counts.
    counts: Vec<Vec<f64>>,
    /// `[pair][i]` Galerkin features.
    features: Option<Vec<Vec<f64>>>,
    samples: Vec<(usize, usize)>,
}

impl CondExp {
    fn empty(mode: CondExpMode, n_states: usize, n_inputs: usize) -> Self {
        CondExp {
            mode,
            n_states,
            n_inputs,
            model: None,
            counts: vec![vec![0.0; n_states]; n_states * n_inputs],
            features: None,
            samples: Vec::new(),
        }
    }

    pub fn direct(mdp: &Mdp) -> Self {
        let mut e = CondExp::empty(CondExpMode::Direct, mdp.n_states(), mdp.n_inputs());
        e.model = Some(mdp.p.clone());
        e
    }

    pub fn empirical(n_states: usize, n_inputs: usize) -> Self {
        CondExp::empty(CondExpMode::EmpiricalPmf, n_states, n_inputs)
    }

    /// `features[x * n_inputs + u]` holds `(h₁(x,u), …, h_{d_G}(x,u))`.
    pub fn galerkin(n_states: usize, n_inputs: usize, features: Vec<Vec<f64>>) -> Result<Self> {
        check_dim("Galerkin feature rows", n_states * n_inputs, features.len())?;
        let dg = features.first().map_or(0, |f| f.len());
        if dg == 0 || features.iter().any(|f| f.len() != dg) {
            return Err(Error::InvalidParameter("Galerkin features must have one common positive length".into()));
        }
        let mut e = CondExp::empty(CondExpMode::Galerkin, n_states, n_inputs);
        e.features = Some(features);
        Ok(e)
    }

    pub fn pretend_deterministic(n_states: usize, n_inputs: usize) -> Self {
        CondExp::empty(CondExpMode::PretendDeterministic, n_states, n_inputs)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    fn pair(&self, x: usize, u: usize) -> usize {
        x * self.n_inputs + u
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        if t.x >= self.n_states || t.next >= self.n_states || t.u >= self.n_inputs {
            return Err(Error::InvalidParameter(format!("transition {t:?} outside the MDP")));
        }
        let k = self.pair(t.x, t.u);
        self.counts[k][t.next] += 1.0;
        self.samples.push((k, t.next));
        Ok(())
    }

    pub fn extend(&mut self, ts: &[Transition]) -> Result<()> {
        ts.iter().try_for_each(|t| self.push(t))
    }

    /// `(A, B)` with `A = E[h h ᵀ]` and `B[i][x′] = E[hᵢ(Y) 1{X′ = x′}]`.
    fn moments(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let f = self.features.as_ref().ok_or_else(|| Error::InvalidParameter("no Galerkin features".into()))?;
        if self.samples.is_empty() {
            return Err(Error::InvalidParameter("Galerkin fit needs samples".into()));
        }
        let dg = f[0].len();
        let inv = 1.0 / self.samples.len() as f64;
        let mut a = DMatrix::zeros(dg, dg);
        let mut b = DMatrix::zeros(dg, self.n_states);
        for &(k, xn) in &self.samples {
            let fk = DVector::from_column_slice(&f[k]);
            a += &fk * fk.transpose() * inv;
            for i in 0..dg {
                b[(i, xn)] += inv * fk[i];
            }
        }
        Ok((a, b))
    }

    fn pinv(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = 1e-12 * smax.max(1e-300);
        let singular = svd.singular_values.iter().any(|s| *s <= eps);
        let pinv = svd.pseudo_inverse(eps).unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()));
        (pinv, singular)
    }

    /// Fits `α° = A⁻¹b` for `Z = h(X(k+1))`.
    pub fn galerkin_fit(&self, h: &[f64]) -> Result<GalerkinFit> {
        check_dim("relative value", self.n_states, h.len())?;
        let (a, bm) = self.moments()?;
        let hv = DVector::from_column_slice(h);
        let b = &bm * &hv;
        let (pinv, singular) = CondExp::pinv(&a);
        if singular {
            log::warn!("Galerkin matrix A is singular; using the least-norm solution");
        }
        let alpha = &pinv * &b;
        let f = self.features.as_ref().unwrap();
        let inv = 1.0 / self.samples.len() as f64;
        let mut orth = DVector::zeros(alpha.len());
        for &(k, xn) in &self.samples {
            let fk = DVector::from_column_slice(&f[k]);
            let err = h[xn] - fk.dot(&alpha);
            orth += fk * (inv * err);
        }
        Ok(GalerkinFit {
            alpha,
            a,
            b,
            orthogonality: orth.amax(),
            singular,
        })
    }

    /// Linear map `h ↦ ĥ(x, u)` as a `pairs × states` matrix, with NaN rows for
    /// pairs the estimator knows nothing about. `None` in pretend-deterministic mode.
    pub fn kernel(&self) -> Result<Option<DMatrix<f64>>> {
        let (n, m) = (self.n_states, self.n_inputs);
        match self.mode {
            CondExpMode::PretendDeterministic => Ok(None),
            CondExpMode::Direct => {
                let p = self.model.as_ref().ok_or_else(|| Error::InvalidParameter("direct mode needs a model".into()))?;
                Ok(Some(DMatrix::from_fn(n * m, n, |k, y| p[k % m][k / m][y])))
            }
            CondExpMode::EmpiricalPmf => Ok(Some(DMatrix::from_fn(n * m, n, |k, y| {
                let tot: f64 = self.counts[k].iter().sum();
                if tot > 0.0 {
                    self.counts[k][y] / tot
                } else {
                    f64::NAN
                }
            }))),
            CondExpMode::Galerkin => {
                let (a, bm) = self.moments()?;
                let (pinv, singular) = CondExp::pinv(&a);
                if singular {
                    log::warn!("Galerkin matrix A is singular; using the least-norm solution");
                }
                let f = self.features.as_ref().unwrap();
                let feats = DMatrix::from_fn(n * m, f[0].len(), |k, i| f[k][i]);
                Ok(Some(feats * pinv * bm))
            }
        }
    }

    /// Estimate of `E[h(X(k+1)) | x, u]`; `next` is the observed successor.
    pub fn estimate(&self, h: &[f64], x: usize, u: usize, next: usize) -> Result<f64> {
        check_dim("relative value", self.n_states, h.len())?;
        if x >= self.n_states || u >= self.n_inputs || next >= self.n_states {
            return Err(Error::InvalidParameter(format!("pair ({x}, {u}) outside the MDP")));
        }
        let k = self.pair(x, u);
        match self.mode {
            CondExpMode::PretendDeterministic => Ok(h[next]),
            CondExpMode::Direct => {
                let p = self.model.as_ref().ok_or_else(|| Error::InvalidParameter("direct mode needs a model".into()))?;
                Ok(p[u][x].iter().zip(h).map(|(a, b)| a * b).sum())
            }
            CondExpMode::EmpiricalPmf => {
                let tot: f64 = self.counts[k].iter().sum();
                if tot == 0.0 {
                    return Err(Error::InvalidParameter(format!("no samples of pair ({x}, {u})")));
                }
                Ok(self.counts[k].iter().zip(h).map(|(c, v)| c * v).sum::<f64>() / tot)
            }
            CondExpMode::Galerkin => {
                let fit = self.galerkin_fit(h)?;
                let f = self.features.as_ref().unwrap();
                Ok(f[k].iter().zip(fit.alpha.iter()).map(|(a, b)| a * b).sum())
            }
        }
    }
}

/// Simulates `n` steps under the randomized policy `policy[x][u]` from `x0`,
/// with inverse-CDF draws from a seeded ChaCha stream.
pub fn sample_chain(mdp: &Mdp, policy: &[Vec<f64>], x0: usize, n: usize, seed: u64) -> Result<Vec<Transition>> {
    mdp.validate()?;
    check_policy(policy, mdp.n_states(), mdp.n_inputs())?;
    if x0 >= mdp.n_states() {
        return Err(Error::InvalidParameter(format!("start state {x0} outside the MDP")));
    }
    let draw = |pmf: &[f64], v: f64| -> usize {
        let mut acc = 0.0;
        for (i, p) in pmf.iter().enumerate() {
            acc += p;
            if v < acc {
                return i;
            }
        }
        pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        let u = draw(&policy[x], rng.gen::<f64>());
        let next = draw(&mdp.p[u][x], rng.gen::<f64>());
        out.push(Transition {
            x,
            u,
            cost: mdp.cost[x][u],
            next,
        });
        x = next;
    }
    Ok(out)
}
