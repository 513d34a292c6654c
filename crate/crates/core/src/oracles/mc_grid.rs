use crate::env::{ControlSystem, MountainCar};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Node spacing of the Mountain Car reference grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub z_step: f64,
    pub v_step: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            z_step: 0.041,
            v_step: 0.001,
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

/// Value function of the interpolated grid model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridValue {
    pub car: MountainCar,
    pub spec: GridSpec,
    /// Position nodes; the last one sits on the goal line, where `J = 0`.
    pub zs: Vec<f64>,
    pub vs: Vec<f64>,
    /// `values[i * vs.len() + j] = J(zs[i], vs[j])`
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub params_hash: String,
}

fn params_hash(car: &MountainCar, spec: &GridSpec) -> String {
    let text = serde_json::to_string(&(car, spec)).unwrap_or_default();
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// Cell index and weight of `t` among the sorted nodes (clamped at both ends).
fn locate(nodes: &[f64], t: f64) -> (usize, f64) {
    let last = nodes.len() - 1;
    if t <= nodes[0] {
        return (0, 0.0);
    }
    if t >= nodes[last] {
        return (last - 1, 1.0);
    }
    let i = nodes.partition_point(|v| *v <= t) - 1;
    let i = i.min(last - 1);
    (i, (t - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

fn bilinear(zs: &[f64], vs: &[f64], values: &[f64], z: f64, v: f64) -> f64 {
    let nv = vs.len();
    let (i, a) = locate(zs, z);
    let (j, b) = locate(vs, v);
    let at = |i: usize, j: usize| values[i * nv + j];
    (1.0 - a) * ((1.0 - b) * at(i, j) + b * at(i, j + 1)) + a * ((1.0 - b) * at(i + 1, j) + b * at(i + 1, j + 1))
}

impl GridValue {
    /// Bilinear interpolation; zero on and beyond the goal line.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        if self.car.at_goal(x) {
            return 0.0;
        }
        bilinear(&self.zs, &self.vs, &self.values, x[0], x[1])
    }

    /// `argmin_u {c + J(F(x,u))}` under the interpolated value; ties go to `u = −1`.
    pub fn greedy(&self, x: &[f64]) -> Vec<f64> {
        let mut best = (f64::INFINITY, vec![-1.0]);
        for u in MountainCar::input_list() {
            let v = self.car.cost(x, &u) + self.interpolate(&self.car.dynamics(x, &u));
            if v < best.0 {
                best = (v, u);
            }
        }
        best.1
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    /// Loads a cached grid, provided it was built for the same car and spec.
    pub fn load_cached(path: &Path, car: &MountainCar, spec: &GridSpec) -> Result<GridValue> {
        let grid: GridValue = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let want = params_hash(car, spec);
        if grid.params_hash != want {
            return Err(Error::FingerprintMismatch {
                expected: want,
                found: grid.params_hash,
            });
        }
        Ok(grid)
    }
}

/// Value iteration on the grid model, with successors evaluated by bilinear
/// interpolation.
pub fn mc_value_iteration(car: &MountainCar, spec: &GridSpec) -> Result<GridValue> {
    if !(spec.z_step > 0.0 && spec.v_step > 0.0) {
        return Err(Error::InvalidParameter("grid steps must be positive".into()));
    }
    let mut zs: Vec<f64> = Vec::new();
    let mut z = car.z_min;
    while z < car.z_goal - 1e-12 {
        zs.push(z);
        z = car.z_min + zs.len() as f64 * spec.z_step;
    }
    zs.push(car.z_goal);
    let nv = (2.0 * car.v_bar / spec.v_step).round() as usize + 1;
    let vs: Vec<f64> = (0..nv)
        .map(|j| -car.v_bar + 2.0 * car.v_bar * j as f64 / (nv - 1) as f64)
        .collect();
    let nz = zs.len();
    let inputs = MountainCar::input_list();
    // successors do not change between sweeps
    let succ: Vec<[(f64, f64); 2]> = (0..(nz - 1) * nv)
        .map(|k| {
            let x = [zs[k / nv], vs[k % nv]];
            let a = car.dynamics(&x, &inputs[0]);
            let b = car.dynamics(&x, &inputs[1]);
            [(a[0], a[1]), (b[0], b[1])]
        })
        .collect();
    let mut values = vec![0.0; nz * nv];
    let mut residual = f64::INFINITY;
    for it in 1..=spec.max_iter {
        let mut next = vec![0.0; nz * nv];
        residual = 0.0;
        for (k, s) in succ.iter().enumerate() {
            let best = s
                .iter()
                .map(|&(z, v)| if z >= car.z_goal { 0.0 } else { bilinear(&zs, &vs, &values, z, v) })
                .fold(f64::INFINITY, f64::min);
            next[k] = 1.0 + best;
            residual = residual.max((next[k] - values[k]).abs());
        }
        values = next;
        if residual <= spec.tol {
            return Ok(GridValue {
                car: car.clone(),
                spec: *spec,
                zs,
                vs,
                values,
                iterations: it,
                residual,
                params_hash: params_hash(car, spec),
            });
        }
    }
    Err(Error::NonConvergence {
        what: "Mountain Car grid value iteration",
        iterations: spec.max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_clamps() {
        let nodes = [0.0, 1.0, 3.0];
        assert_eq!(locate(&nodes, -1.0), (0, 0.0));
        assert_eq!(locate(&nodes, 2.0), (1, 0.5));
        assert_eq!(locate(&nodes, 5.0), (1, 1.0));
    }

    #[test]
    fn coarse_grid_reaches_goal() {
        let car = MountainCar::default();
        let spec = GridSpec {
            z_step: 0.1,
            v_step: 0.01,
            ..GridSpec::default()
        };
        let grid = mc_value_iteration(&car, &spec).unwrap();
        assert_eq!(grid.interpolate(&[0.6, 0.0]), 0.0);
        assert!(grid.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        let mut x = vec![-0.5, 0.0];
        let mut steps = 0;
        while !car.at_goal(&x) && steps < 1000 {
            x = car.dynamics(&x, &grid.greedy(&x));
            steps += 1;
        }
        assert!(car.at_goal(&x), "stuck at {x:?}");
    }
}
