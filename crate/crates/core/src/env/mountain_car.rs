use super::{ControlSystem, InputSet};
use serde::{Deserialize, Serialize};

/// The classic Mountain Car with projected position/velocity and a parked goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MountainCar {
    pub z_min: f64,
    pub z_goal: f64,
    pub v_bar: f64,
    pub force: f64,
    pub gravity: f64,
    /// Update velocity first and move with the new velocity.
    pub velocity_first: bool,
    /// Zero the velocity when the car hits the left wall.
    pub wall_reset: bool,
}

impl Default for MountainCar {
    fn default() -> Self {
        MountainCar {
            z_min: -1.2,
            z_goal: 0.5,
            v_bar: 0.07,
            force: 1e-3,
            gravity: 2.5e-3,
            velocity_first: true,
            wall_reset: true,
        }
    }
}

impl MountainCar {
    pub fn goal(&self) -> [f64; 2] {
        [self.z_goal, 0.0]
    }

    pub fn at_goal(&self, x: &[f64]) -> bool {
        x[0] >= self.z_goal
    }

    pub fn input_list() -> Vec<Vec<f64>> {
        vec![vec![-1.0], vec![1.0]]
    }

    /// Projects an arbitrary point onto the state box (goal states collapse to the goal).
    pub fn project(&self, x: &[f64]) -> [f64; 2] {
        if x[0] >= self.z_goal {
            return self.goal();
        }
        [x[0].max(self.z_min), x[1].clamp(-self.v_bar, self.v_bar)]
    }

    /// The ten standard evaluation starts: rest positions spread over the valley.
    pub fn standard_starts() -> Vec<Vec<f64>> {
        (0..10)
            .map(|i| vec![-1.1 + 0.1 * i as f64 + 0.05, 0.0])
            .collect()
    }

    /// `count` restart points spread over the state box by a two-dimensional
    /// golden-ratio sequence.
    pub fn spread_starts(&self, count: usize) -> Vec<Vec<f64>> {
        (1..=count)
            .map(|i| {
                let a = (i as f64 * 0.618_033_988_749_894_9).fract();
                let b = (i as f64 * 0.754_877_666_246_692_7).fract();
                vec![
                    self.z_min + a * (self.z_goal - self.z_min) * 0.999,
                    (2.0 * b - 1.0) * self.v_bar,
                ]
            })
            .collect()
    }
}

impl ControlSystem for MountainCar {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        if self.at_goal(x) {
            return self.goal().to_vec();
        }
        let (z, v) = (x[0], x[1]);
        let dv = self.force * u[0] - self.gravity * (3.0 * z).cos();
        let (mut z_next, mut v_next);
        if self.velocity_first {
            v_next = (v + dv).clamp(-self.v_bar, self.v_bar);
            z_next = z + v_next;
        } else {
            z_next = z + v;
            v_next = (v + dv).clamp(-self.v_bar, self.v_bar);
        }
        if z_next <= self.z_min {
            z_next = self.z_min;
            if self.wall_reset {
                v_next = 0.0;
            }
        }
        if z_next >= self.z_goal {
            return self.goal().to_vec();
        }
        vec![z_next, v_next]
    }

    fn cost(&self, x: &[f64], _u: &[f64]) -> f64 {
        if self.at_goal(x) {
            0.0
        } else {
            1.0
        }
    }

    fn equilibrium(&self) -> (Vec<f64>, Vec<f64>) {
        (self.goal().to_vec(), vec![-1.0])
    }

    fn inputs(&self, _x: &[f64]) -> InputSet {
        InputSet::Finite(Self::input_list())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_from_origin() {
        let mc = MountainCar::default();
        let x = mc.step(&[0.0, 0.0], &[1.0]).unwrap();
        assert!((x[1] + 0.0015).abs() < 1e-15);
        assert!((x[0] + 0.0015).abs() < 1e-15);
    }

    #[test]
    fn goal_is_absorbing() {
        let mc = MountainCar::default();
        for u in [-1.0, 1.0] {
            assert_eq!(mc.step(&[0.5, 0.0], &[u]).unwrap(), vec![0.5, 0.0]);
            assert_eq!(mc.cost(&[0.5, 0.0], &[u]), 0.0);
        }
    }

    #[test]
    fn inadmissible_input_rejected() {
        let mc = MountainCar::default();
        assert!(mc.step(&[0.0, 0.0], &[0.5]).is_err());
    }

    #[test]
    fn wall_resets_velocity() {
        let mc = MountainCar::default();
        let x = mc.step(&[-1.19, -0.05], &[-1.0]).unwrap();
        assert_eq!(x, vec![-1.2, 0.0]);
    }
}
