use crate::approx::{sym_from_tri, Architecture, QuadBasis};
use crate::env::LqrSystem;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{csr_from_dense, min_eigenpair};
use crate::qpcore::{solve_qp, QpSettings, QpStatus, QuadraticProgram};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One Riccati step `S + FᵀMF − FᵀMG(R + GᵀMG)⁻¹GᵀMF`.
pub fn riccati_step(lqr: &LqrSystem, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("Riccati iterate", lqr.n(), m.nrows())?;
    let (f, g) = (&lqr.f, &lqr.g);
    let mf = m * f;
    let gmf = g.transpose() * &mf;
    let inner = &lqr.r + g.transpose() * m * g;
    let ch = inner
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("R + GᵀMG".into()))?;
    let next = &lqr.s + f.transpose() * &mf - gmf.transpose() * ch.solve(&gmf);
    Ok((&next + next.transpose()) * 0.5)
}

/// `‖Ric(M) − M‖∞` (max-abs entry).
pub fn are_residual(lqr: &LqrSystem, m: &DMatrix<f64>) -> Result<f64> {
    Ok((riccati_step(lqr, m)? - m).amax())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiccatiSolution {
    pub m: DMatrix<f64>,
    /// Optimal feedback `u = −Kx`, `K = (R + GᵀMG)⁻¹GᵀMF`.
    pub gain: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Iterates the Riccati map from `M₀ = 0` until successive iterates differ by at most `tol`.
pub fn riccati_solve(lqr: &LqrSystem, tol: f64, max_iter: usize) -> Result<RiccatiSolution> {
    let n = lqr.n();
    let mut m = DMatrix::zeros(n, n);
    for it in 1..=max_iter {
        let next = riccati_step(lqr, &m)?;
        let delta = (&next - &m).amax();
        m = next;
        if !m.iter().all(|v| v.is_finite()) || m.amax() > 1e15 {
            break;
        }
        if delta <= tol * m.amax().max(1.0) {
            let inner = &lqr.r + lqr.g.transpose() * &m * &lqr.g;
            let gain = inner
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite("R + GᵀMG".into()))?
                .solve(&(lqr.g.transpose() * &m * &lqr.f));
            return Ok(RiccatiSolution {
                residual: are_residual(lqr, &m)?,
                m,
                gain,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "Riccati iteration (is (F, G) stabilizable?)",
        iterations: max_iter,
        residual: m.amax(),
    })
}

/// `(Mᴶ, M^Q)` on `z = (x, u)`: `Mᴶ = diag(M, 0)` and `M^Q = M^c + ΞᵀMΞ` with `Ξ = [F G]`.
pub fn lqr_q_matrices(m: &DMatrix<f64>, lqr: &LqrSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, k) = (lqr.n(), lqr.n() + lqr.m());
    check_dim("value matrix", n, m.nrows())?;
    check_dim("value matrix", n, m.ncols())?;
    let mut xi = DMatrix::zeros(n, k);
    xi.view_mut((0, 0), (n, n)).copy_from(&lqr.f);
    xi.view_mut((0, n), (n, lqr.m())).copy_from(&lqr.g);
    let mut mj = DMatrix::zeros(k, k);
    mj.view_mut((0, 0), (n, n)).copy_from(m);
    let mq = lqr.cost_matrix() + xi.transpose() * m * &xi;
    Ok((mj, (&mq + mq.transpose()) * 0.5))
}

/// Deterministic, roughly uniform unit directions in `ℝᵈ`.
///
/// In the plane these are `count` equally spaced angles on a half circle
/// (`z` and `−z` give the same constraint). In higher dimension the
/// coordinate axes and their pairwise sums come first, followed by
/// normalized Halton points of the cube `[−1, 1]ᵈ`.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0]];
    }
    if dim == 2 {
        return (0..count)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..dim {
        for j in i..dim {
            let mut z = vec![0.0; dim];
            z[i] += 1.0;
            z[j] += 1.0;
            out.push(z);
        }
    }
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let radical_inverse = |mut i: u64, b: u64| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    };
    let mut k = 1u64;
    while out.len() < count {
        let z: Vec<f64> = (0..dim)
            .map(|d| 2.0 * radical_inverse(k, PRIMES[d % PRIMES.len()] + 12 * (d / PRIMES.len()) as u64) - 1.0)
            .collect();
        k += 1;
        if z.iter().map(|v| v * v).sum::<f64>() > 1e-2 {
            out.push(z);
        }
    }
    out.into_iter()
        .map(|z| {
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            z.into_iter().map(|v| v / norm).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSettings {
    pub qp: QpSettings,
    /// Extra cutting-plane rounds. Each adds the direction of the most negative
    /// eigenvalue of `M^Q − Mᴶ` at the current solution.
    pub refine_rounds: usize,
    /// Stop refining once `λ_min(M^Q − Mᴶ) ≥ −cut_tol`.
    pub cut_tol: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings {
            qp: QpSettings::default(),
            refine_rounds: 50,
            cut_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub m: DMatrix<f64>,
    pub trace: f64,
    /// Directions actually used (grid followed by cuts).
    pub directions: usize,
    pub cuts: usize,
    /// `λ_min(M^Q − Mᴶ)` at the returned `M`; negative means a grid gap remains.
    pub min_eig: f64,
}

/// Maximizes `trace(M)` subject to `zᵀ(M^Q(M) − Mᴶ(M))z ≥ 0` for every grid direction.
///
/// The unknowns are the upper triangle of `M`, in the order of [`QuadBasis`].
/// Each constraint reads `(Fx+Gu)ᵀM(Fx+Gu) − xᵀMx ≥ −zᵀM^c z`, which is linear
/// in `M`. A grid that leaves some direction of `M` unconstrained makes the
/// program unbounded, reported as [`Error::Unbounded`].
pub fn lqr_sdp_gridded(lqr: &LqrSystem, grid: &[Vec<f64>], settings: &SdpSettings) -> Result<SdpSolution> {
    let (n, m_in) = (lqr.n(), lqr.m());
    let k = n + m_in;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty direction grid".into()));
    }
    for z in grid {
        check_dim("grid direction", k, z.len())?;
    }
    let basis = QuadBasis::new(n, 0, false);
    let nv = basis.q_len();
    let mc = lqr.cost_matrix();
    // row of -coefficients so that the constraint is a_z·θ ≤ zᵀM^c z
    let row = |z: &[f64]| -> (Vec<f64>, f64) {
        let zv = DVector::from_column_slice(z);
        let x = zv.rows(0, n).into_owned();
        let y = &lqr.f * &x + &lqr.g * zv.rows(n, m_in);
        let fy = basis.psi(y.as_slice(), &[]);
        let fx = basis.psi(x.as_slice(), &[]);
        let coef = fx.sub(&fy).to_dense();
        (coef.as_slice().to_vec(), zv.dot(&(&mc * &zv)))
    };
    let mut dirs: Vec<Vec<f64>> = grid.to_vec();
    let mut rows: Vec<(Vec<f64>, f64)> = dirs.iter().map(|z| row(z)).collect();
    // trace(M) picks the diagonal coordinates
    let c = basis.psi(&vec![1.0; n], &[]).to_dense().map(|v| if v == 1.0 { 1.0 } else { 0.0 });
    let mut cuts = 0;
    let mut last: Option<SdpSolution> = None;
    loop {
        let a = DMatrix::from_fn(rows.len(), nv, |r, j| rows[r].0[j]);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let prob = QuadraticProgram::new(DMatrix::zeros(nv, nv), -&c).with_inequalities(csr_from_dense(&a), b);
        let sol = solve_qp(&prob, &settings.qp)?;
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Unbounded => {
                return Err(Error::Unbounded(format!(
                    "{} directions leave trace(M) unbounded; densify the grid",
                    dirs.len()
                )))
            }
            QpStatus::Infeasible => return Err(Error::Infeasible("gridded LQR program".into())),
            // a stalled refinement round keeps the previous certified solution
            QpStatus::MaxIter if last.is_some() => return Ok(last.unwrap()),
            QpStatus::MaxIter => {
                return Err(Error::NonConvergence {
                    what: "gridded LQR program",
                    iterations: sol.iterations,
                    residual: sol.kkt.max(),
                })
            }
        }
        let m = sym_from_tri(sol.theta.as_slice(), n);
        let (mj, mq) = lqr_q_matrices(&m, lqr)?;
        let (min_eig, v) = min_eigenpair(&(mq - mj));
        let current = SdpSolution {
            trace: m.trace(),
            m,
            directions: dirs.len(),
            cuts,
            min_eig,
        };
        if min_eig >= -settings.cut_tol || cuts >= settings.refine_rounds {
            return Ok(current);
        }
        last = Some(current);
        let z: Vec<f64> = v.as_slice().to_vec();
        rows.push(row(&z));
        dirs.push(z);
        cuts += 1;
    }
}
