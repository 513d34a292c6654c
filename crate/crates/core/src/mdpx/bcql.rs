use super::{CondExp, Normalization, Transition};
use crate::algos::{prox_iterations, AlgoConfig, ConstraintMode, RunOutput};
use crate::approx::Architecture;
use crate::env::FiniteSystem;
use crate::error::{check_dim, Error, Result};
use crate::explore::Trajectory;
use crate::linalg::SparseVec;
use crate::losses::{equal_windows, BatchLossData, PlusVariant, TdRow};
use nalgebra::DVector;

/// Rows of the average-cost temporal difference
///
/// ```text
///   𝒟ₖ(θ) = −Q^θ(x,u) − δ⟨ν,Q^θ⟩ + c(x,u) + ĥ^θ_{k+1|k} = c − Υₖᵀθ,
///   Υₖ = ψ(x,u) + δ Σ ν ψ − ψ̂ᴶ_{k+1|k}
/// ```
///
/// with `ψ̂ᴶ` from the estimator (or `ψᴶ(x(k+1))` when pretending the world is deterministic).
pub fn mdp_td_rows<A: Architecture + ?Sized>(
    samples: &[Transition],
    arch: &A,
    est: &CondExp,
    norm: &Normalization,
) -> Result<Vec<TdRow>> {
    let d = arch.dim();
    let n_states = samples.iter().map(|t| t.x.max(t.next) + 1).max().unwrap_or(0);
    let kernel = est.kernel()?;
    let n_states = kernel.as_ref().map_or(n_states, |k| k.ncols());
    let n_inputs = kernel.as_ref().map(|k| k.nrows() / n_states.max(1));
    let psi_j: Vec<SparseVec> = (0..n_states).map(|x| arch.psi_j(&FiniteSystem::state(x))).collect();
    let mut nu_psi = SparseVec::zeros(d);
    for &((x, u), w) in &norm.nu {
        nu_psi = nu_psi.axpy(norm.delta * w, &arch.psi(&FiniteSystem::state(x), &FiniteSystem::state(u)));
    }
    let mut rows = Vec::with_capacity(samples.len());
    for t in samples {
        let psi = arch.psi(&FiniteSystem::state(t.x), &FiniteSystem::state(t.u)).add(&nu_psi);
        let hat = match (&kernel, n_inputs) {
            (Some(k), Some(m)) => {
                let row = k.row(t.x * m + t.u);
                if row.iter().any(|v| v.is_nan()) {
                    return Err(Error::InvalidParameter(format!(
                        "estimator has no data for pair ({}, {})",
                        t.x, t.u
                    )));
                }
                let mut acc = SparseVec::zeros(d);
                for (y, w) in row.iter().enumerate() {
                    if *w != 0.0 {
                        acc = acc.axpy(*w, &psi_j[y]);
                    }
                }
                acc
            }
            _ => psi_j
                .get(t.next)
                .cloned()
                .ok_or_else(|| Error::InvalidParameter(format!("successor {} out of range", t.next)))?,
        };
        rows.push(TdRow {
            upsilon: psi.sub(&hat),
            cost: t.cost,
        });
    }
    Ok(rows)
}

/// BCQL on the average-cost loss, cycling over equal windows of `samples`.
pub fn run_bcql_mdp<A: Architecture + ?Sized>(
    samples: &[Transition],
    n_inputs: usize,
    arch: &A,
    est: &CondExp,
    norm: &Normalization,
    cfg: &AlgoConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no transitions".into()));
    }
    let d = arch.dim();
    let rows = mdp_td_rows(samples, arch, est, norm)?;
    let mut traj = Trajectory::default();
    for t in samples {
        traj.push(FiniteSystem::state(t.x), FiniteSystem::state(t.u), t.cost, FiniteSystem::state(t.next));
    }
    let zeta = cfg.zeta.resolve(&traj);
    let zeta_plus = cfg.zeta_plus.resolve(&traj);
    let with_plus = cfg.kappa_plus > 0.0 && cfg.mode != ConstraintMode::AdvantageCone;
    let mu = cfg.mu.vector(arch);
    let theta0 = match &cfg.theta0 {
        Some(t) => {
            check_dim("theta0", d, t.len())?;
            DVector::from_column_slice(t)
        }
        None => DVector::zeros(d),
    };
    let windows = equal_windows(samples.len(), cfg.batches);
    let mut batches = Vec::with_capacity(windows.len());
    for w in &windows {
        let mut zk = Vec::with_capacity(w.len());
        let mut diffs = Vec::with_capacity(w.len());
        let mut zpk = Vec::with_capacity(w.len());
        for k in w.clone() {
            let (x, u) = (&traj.states[k], &traj.inputs[k]);
            zk.push(zeta.entries(arch, k, x, u));
            zpk.push(zeta_plus.entries(arch, k, x, u));
            if with_plus || !zeta_plus.is_zero() {
                let hj = arch.psi_j(x);
                let mut v = vec![hj.sub(&arch.psi(x, u))];
                if cfg.plus_variant == PlusVariant::MinQ {
                    for w in (0..n_inputs).filter(|w| *w != samples[k].u) {
                        v.push(hj.sub(&arch.psi(x, &FiniteSystem::state(w))));
                    }
                }
                diffs.push(v);
            } else {
                diffs.push(Vec::new());
            }
        }
        batches.push(BatchLossData::from_rows(
            d,
            &rows[w.clone()],
            &zk,
            &diffs,
            &zpk,
            with_plus,
            mu.clone(),
        )?);
    }
    let epochs = cfg.epochs.unwrap_or(windows.len());
    prox_iterations(&batches, &arch.constraint(), cfg, false, theta0, epochs)
}
