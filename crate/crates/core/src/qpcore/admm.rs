use super::{KktResiduals, QpSettings, QpSolution, QpStatus, QuadraticProgram, WarmStart};
use crate::error::Result;
use crate::linalg::{csr_mul, csr_tmul, csr_vstack, inf_norm, SparseVec};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

const RHO_EQ_FACTOR: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

/// The problem in `l <= A x <= u` form.
struct Stacked {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: CsrMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    m_eq: usize,
    m_in: usize,
    /// Coordinate for each box row.
    box_coords: Vec<usize>,
}

impl Stacked {
    fn from_problem(prob: &QuadraticProgram) -> Stacked {
        let n = prob.dim();
        let box_coords: Vec<usize> = (0..n)
            .filter(|&i| prob.lo[i].is_finite() || prob.hi[i].is_finite())
            .collect();
        let mut coo = CooMatrix::new(box_coords.len(), n);
        for (r, &c) in box_coords.iter().enumerate() {
            coo.push(r, c, 1.0);
        }
        let boxes = CsrMatrix::from(&coo);
        let a = csr_vstack(n, &[&prob.a_eq, &prob.a_in, &boxes]);
        let m_eq = prob.a_eq.nrows();
        let m_in = prob.a_in.nrows();
        let m = a.nrows();
        let mut l = DVector::zeros(m);
        let mut u = DVector::zeros(m);
        for i in 0..m_eq {
            l[i] = prob.b_eq[i];
            u[i] = prob.b_eq[i];
        }
        for i in 0..m_in {
            l[m_eq + i] = f64::NEG_INFINITY;
            u[m_eq + i] = prob.b_in[i];
        }
        for (r, &c) in box_coords.iter().enumerate() {
            l[m_eq + m_in + r] = prob.lo[c];
            u[m_eq + m_in + r] = prob.hi[c];
        }
        Stacked {
            p: prob.p.clone(),
            q: prob.q.clone(),
            a,
            l,
            u,
            m_eq,
            m_in,
            box_coords,
        }
    }

    fn kkt(&self, x: &DVector<f64>, y: &DVector<f64>) -> KktResiduals {
        let ax = csr_mul(&self.a, x);
        let px = &self.p * x;
        let aty = csr_tmul(&self.a, y);
        let stationarity = inf_norm(&(&px + &self.q + &aty));
        let mut primal = 0.0_f64;
        let mut comp = 0.0_f64;
        for i in 0..ax.len() {
            primal = primal.max(self.l[i] - ax[i]).max(ax[i] - self.u[i]);
            let yi = y[i];
            if yi > 0.0 {
                let slack = (self.u[i] - ax[i]).abs();
                comp = comp.max(if slack.is_finite() { yi * slack } else { f64::INFINITY });
            } else if yi < 0.0 {
                let slack = (ax[i] - self.l[i]).abs();
                comp = comp.max(if slack.is_finite() { -yi * slack } else { f64::INFINITY });
            }
        }
        KktResiduals {
            primal: primal.max(0.0),
            stationarity,
            complementarity: comp,
            primal_scale: inf_norm(&ax),
            dual_scale: inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&self.q)),
        }
    }

    fn finish(
        &self,
        x: DVector<f64>,
        y: DVector<f64>,
        status: QpStatus,
        iterations: usize,
        polished: bool,
    ) -> QpSolution {
        let kkt = self.kkt(&x, &y);
        let n = x.len();
        let y_eq = y.rows(0, self.m_eq).into_owned();
        let y_in = y.rows(self.m_eq, self.m_in).into_owned();
        let mut y_box = DVector::zeros(n);
        for (r, &c) in self.box_coords.iter().enumerate() {
            y_box[c] = y[self.m_eq + self.m_in + r];
        }
        let objective = 0.5 * x.dot(&(&self.p * &x)) + self.q.dot(&x);
        QpSolution {
            theta: x,
            y_eq,
            y_in,
            y_box,
            status,
            kkt,
            iterations,
            objective,
            polished,
        }
    }
}

/// Ruiz-equilibrated copy: `P̄ = c D P D`, `q̄ = c D q`, `Ā = E A D`.
struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: CsrMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

fn clamp_scale(norm: f64) -> f64 {
    if norm < 1e-4 {
        1.0
    } else {
        1.0 / norm.clamp(1e-4, 1e4).sqrt()
    }
}

fn equilibrate(st: &Stacked, iters: usize) -> Scaled {
    let n = st.q.len();
    let m = st.a.nrows();
    let mut p = st.p.clone();
    let mut a = st.a.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(m, 1.0);
    for _ in 0..iters {
        let mut col = DVector::zeros(n);
        for j in 0..n {
            col[j] = p.column(j).amax();
        }
        let mut row = DVector::zeros(m);
        for (r, rv) in a.row_iter().enumerate() {
            for (c, v) in rv.col_indices().iter().zip(rv.values()) {
                col[*c] = f64::max(col[*c], v.abs());
                row[r] = f64::max(row[r], v.abs());
            }
        }
        let dd = col.map(clamp_scale);
        let ee = row.map(clamp_scale);
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] *= dd[i] * dd[j];
            }
        }
        for (r, mut rv) in a.row_iter_mut().enumerate() {
            let (cols, vals) = rv.cols_and_values_mut();
            for (c, v) in cols.iter().zip(vals.iter_mut()) {
                *v *= ee[r] * dd[*c];
            }
        }
        d.component_mul_assign(&dd);
        e.component_mul_assign(&ee);
    }
    let q_d = st.q.component_mul(&d);
    let mean_col = if n > 0 {
        (0..n).map(|j| p.column(j).amax()).sum::<f64>() / n as f64
    } else {
        1.0
    };
    let cost_norm = mean_col.max(inf_norm(&q_d));
    let c = if cost_norm < 1e-4 {
        1.0
    } else {
        1.0 / cost_norm.clamp(1e-4, 1e4)
    };
    p *= c;
    Scaled {
        p,
        q: q_d * c,
        a,
        l: st.l.component_mul(&e),
        u: st.u.component_mul(&e),
        d,
        e,
        c,
    }
}

fn rho_vector(sc: &Scaled, rho: f64) -> DVector<f64> {
    DVector::from_fn(sc.l.len(), |i, _| {
        let (l, u) = (sc.l[i], sc.u[i]);
        if !l.is_finite() && !u.is_finite() {
            RHO_MIN
        } else if l == u {
            RHO_EQ_FACTOR * rho
        } else {
            rho
        }
    })
}

/// `P + σI + Aᵀ diag(w) A`, dense.
fn normal_matrix(
    p: &DMatrix<f64>,
    shift: f64,
    a: &CsrMatrix<f64>,
    w: &DVector<f64>,
) -> DMatrix<f64> {
    let n = p.nrows();
    let mut k = p.clone();
    for i in 0..n {
        k[(i, i)] += shift;
    }
    for (r, row) in a.row_iter().enumerate() {
        let wr = w[r];
        let cols = row.col_indices();
        let vals = row.values();
        for (ci, vi) in cols.iter().zip(vals) {
            for (cj, vj) in cols.iter().zip(vals) {
                k[(*ci, *cj)] += wr * vi * vj;
            }
        }
    }
    k
}

fn factor(k: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    k.cholesky()
}

struct Iterate {
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
}

/// Solves `prob`, optionally warm-started.
pub fn solve_qp_warm(
    prob: &QuadraticProgram,
    settings: &QpSettings,
    warm: Option<&WarmStart>,
) -> Result<QpSolution> {
    prob.validate()?;
    let st = Stacked::from_problem(prob);
    let n = st.q.len();
    let m = st.a.nrows();
    let sc = equilibrate(&st, settings.scaling_iters);
    let mut rho = settings.rho;
    let mut rho_vec = rho_vector(&sc, rho);
    let sigma = settings.sigma;
    let mut chol = match factor(normal_matrix(&sc.p, sigma, &sc.a, &rho_vec)) {
        Some(c) => c,
        None => {
            return Err(crate::Error::NotPositiveDefinite(
                "ADMM linear system could not be factored".into(),
            ))
        }
    };

    let mut it = Iterate {
        x: DVector::zeros(n),
        z: DVector::zeros(m),
        y: DVector::zeros(m),
    };
    if let Some(w) = warm {
        if w.theta.len() == n {
            it.x = w.theta.component_div(&sc.d);
        }
        if let Some(y) = &w.y {
            if y.len() == m {
                it.y = y.component_div(&sc.e) * sc.c;
            }
        }
        let ax = csr_mul(&sc.a, &it.x);
        it.z = DVector::from_fn(m, |i, _| ax[i].clamp(sc.l[i], sc.u[i]));
    }

    let alpha = settings.alpha;
    let final_tol = settings.tol;
    let mut stage_tol = final_tol.max(1e-5);
    let mut prev_x = it.x.clone();
    let mut prev_y = it.y.clone();

    for k in 1..=settings.max_iter {
        prev_x.copy_from(&it.x);
        prev_y.copy_from(&it.y);

        let rhs = &it.x * sigma - &sc.q
            + csr_tmul(&sc.a, &(rho_vec.component_mul(&it.z) - &it.y));
        let x_tilde = chol.solve(&rhs);
        let z_tilde = csr_mul(&sc.a, &x_tilde);
        it.x = &x_tilde * alpha + &it.x * (1.0 - alpha);
        let z_relax = &z_tilde * alpha + &it.z * (1.0 - alpha);
        let z_new = DVector::from_fn(m, |i, _| {
            (z_relax[i] + it.y[i] / rho_vec[i]).clamp(sc.l[i], sc.u[i])
        });
        it.y += rho_vec.component_mul(&(&z_relax - &z_new));
        it.z = z_new;

        if k % settings.check_every != 0 && k != settings.max_iter {
            continue;
        }

        let (x_u, y_u) = unscale(&sc, &it);
        let res = residuals(&sc, &it);
        if res.prim <= stage_tol * (1.0 + res.prim_scale)
            && res.dual <= stage_tol * (1.0 + res.dual_scale)
        {
            if settings.polish {
                if let Some((xp, yp)) = polish(&sc, &it) {
                    let kkt = st.kkt(&xp, &yp);
                    if kkt.certified(final_tol) {
                        return Ok(st.finish(xp, yp, QpStatus::Optimal, k, true));
                    }
                }
            }
            let kkt = st.kkt(&x_u, &y_u);
            if kkt.certified(final_tol) {
                return Ok(st.finish(x_u, y_u, QpStatus::Optimal, k, false));
            }
            if stage_tol > final_tol * 1.01 {
                stage_tol = (stage_tol * 0.1).max(final_tol);
            } else {
                stage_tol = (stage_tol * 0.1).max(1e-14);
            }
        }

        let dx = &x_u - prev_x.component_mul(&sc.d);
        let dy = (&it.y - &prev_y).component_mul(&sc.e) / sc.c;
        if primal_infeasible(&st, &dy, settings.infeasibility_tol) {
            return Ok(st.finish(x_u, dy, QpStatus::Infeasible, k, false));
        }
        if dual_infeasible(&st, &dx, settings.infeasibility_tol) {
            return Ok(st.finish(dx, y_u, QpStatus::Unbounded, k, false));
        }

        if settings.adaptive_rho && k % (5 * settings.check_every) == 0 {
            let ratio = (res.prim_rel / res.dual_rel.max(1e-30)).sqrt();
            let new_rho = (rho * ratio).clamp(RHO_MIN, RHO_MAX);
            if new_rho > 5.0 * rho || new_rho < 0.2 * rho {
                rho = new_rho;
                rho_vec = rho_vector(&sc, rho);
                if let Some(c) = factor(normal_matrix(&sc.p, sigma, &sc.a, &rho_vec)) {
                    chol = c;
                }
            }
        }
    }

    let (x_u, y_u) = unscale(&sc, &it);
    if settings.polish {
        if let Some((xp, yp)) = polish(&sc, &it) {
            let kkt = st.kkt(&xp, &yp);
            if kkt.certified(final_tol) {
                return Ok(st.finish(xp, yp, QpStatus::Optimal, settings.max_iter, true));
            }
        }
    }
    Ok(st.finish(x_u, y_u, QpStatus::MaxIter, settings.max_iter, false))
}

fn unscale(sc: &Scaled, it: &Iterate) -> (DVector<f64>, DVector<f64>) {
    (
        it.x.component_mul(&sc.d),
        it.y.component_mul(&sc.e) / sc.c,
    )
}

struct Res {
    prim: f64,
    dual: f64,
    prim_scale: f64,
    dual_scale: f64,
    prim_rel: f64,
    dual_rel: f64,
}

fn residuals(sc: &Scaled, it: &Iterate) -> Res {
    let ax = csr_mul(&sc.a, &it.x);
    let px = &sc.p * &it.x;
    let aty = csr_tmul(&sc.a, &it.y);
    let r_prim_scaled = &ax - &it.z;
    let r_dual_scaled = &px + &sc.q + &aty;
    // unscaled norms
    let prim = inf_norm(&r_prim_scaled.component_div(&sc.e));
    let dual = inf_norm(&r_dual_scaled.component_div(&sc.d)) / sc.c;
    let prim_scale = inf_norm(&ax.component_div(&sc.e)).max(inf_norm(&it.z.component_div(&sc.e)));
    let dual_scale = (inf_norm(&px.component_div(&sc.d)))
        .max(inf_norm(&aty.component_div(&sc.d)))
        .max(inf_norm(&sc.q.component_div(&sc.d)))
        / sc.c;
    let prim_rel = inf_norm(&r_prim_scaled) / inf_norm(&ax).max(inf_norm(&it.z)).max(1e-30);
    let dual_rel = inf_norm(&r_dual_scaled)
        / inf_norm(&px)
            .max(inf_norm(&aty))
            .max(inf_norm(&sc.q))
            .max(1e-30);
    Res {
        prim,
        dual,
        prim_scale,
        dual_scale,
        prim_rel,
        dual_rel,
    }
}

fn primal_infeasible(st: &Stacked, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = inf_norm(dy);
    if norm < 1e-12 || st.a.nrows() == 0 {
        return false;
    }
    if inf_norm(&csr_tmul(&st.a, dy)) > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        let v = dy[i];
        if v > 0.0 {
            if !st.u[i].is_finite() {
                if v > eps * norm {
                    return false;
                }
                continue;
            }
            support += st.u[i] * v;
        } else if v < 0.0 {
            if !st.l[i].is_finite() {
                if -v > eps * norm {
                    return false;
                }
                continue;
            }
            support += st.l[i] * v;
        }
    }
    support < -eps * norm
}

fn dual_infeasible(st: &Stacked, dx: &DVector<f64>, eps: f64) -> bool {
    let norm = inf_norm(dx);
    if norm < 1e-12 {
        return false;
    }
    if inf_norm(&(&st.p * dx)) > eps * norm {
        return false;
    }
    if st.q.dot(dx) > -eps * norm {
        return false;
    }
    let adx = csr_mul(&st.a, dx);
    for i in 0..adx.len() {
        let v = adx[i];
        let lf = st.l[i].is_finite();
        let uf = st.u[i].is_finite();
        if uf && v > eps * norm {
            return false;
        }
        if lf && v < -eps * norm {
            return false;
        }
    }
    true
}

/// Active-set polish: solves the equality-constrained KKT system on the rows the
/// ADMM iterate flags as active, with regularization and iterative refinement.
fn polish(sc: &Scaled, it: &Iterate) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = sc.q.len();
    let m = sc.a.nrows();
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..m {
        let (l, u) = (sc.l[i], sc.u[i]);
        if l == u {
            active.push((i, u));
        } else if it.z[i] - l < -it.y[i] {
            active.push((i, l));
        } else if u - it.z[i] < it.y[i] {
            active.push((i, u));
        }
    }
    let rows: Vec<SparseVec> = {
        let mut out = Vec::with_capacity(active.len());
        for &(i, _) in &active {
            let row = sc.a.row(i);
            out.push(SparseVec {
                dim: n,
                idx: row.col_indices().to_vec(),
                val: row.values().to_vec(),
            });
        }
        out
    };
    let act = crate::linalg::csr_from_rows(n, &rows);
    let b = DVector::from_iterator(active.len(), active.iter().map(|(_, v)| *v));
    let delta = 1e-7;
    let w = DVector::from_element(active.len(), 1.0 / delta);
    let chol = factor(normal_matrix(&sc.p, delta, &act, &w))?;

    let mut x = DVector::zeros(n);
    let mut ya = DVector::zeros(active.len());
    for _ in 0..30 {
        let r1 = -&sc.q - &sc.p * &x - csr_tmul(&act, &ya);
        let r2 = &b - csr_mul(&act, &x);
        if inf_norm(&r1) < 1e-13 && inf_norm(&r2) < 1e-13 {
            break;
        }
        let dx = chol.solve(&(&r1 + csr_tmul(&act, &r2) / delta));
        let dy = (csr_mul(&act, &dx) - &r2) / delta;
        x += dx;
        ya += dy;
    }
    let mut y = DVector::zeros(m);
    for (k, &(i, _)) in active.iter().enumerate() {
        y[i] = ya[k];
    }
    // multiplier signs must match the side each row was assigned to
    for (k, &(i, bound)) in active.iter().enumerate() {
        if sc.l[i] == sc.u[i] {
            continue;
        }
        let is_upper = bound == sc.u[i];
        if (is_upper && ya[k] < 0.0) || (!is_upper && ya[k] > 0.0) {
            y[i] = 0.0;
        }
    }
    Some((x.component_mul(&sc.d), y.component_mul(&sc.e) / sc.c))
}
