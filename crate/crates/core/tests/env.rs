mod common;

use common::random_system;
use cvxq::env::{
    apply_discount, to_total_cost_finite_horizon, to_total_cost_spp, ControlSystem, Criterion, FiniteSystem, InputSet,
    LqrSystem, MountainCar,
};
use cvxq::oracles::value_iteration;
use proptest::prelude::*;

#[test]
fn mountain_car_push_from_rest_at_origin() {
    let mc = MountainCar::default();
    let y = mc.step(&[0.0, 0.0], &[1.0]).unwrap();
    assert!((y[0] + 0.0015).abs() < 1e-15);
    assert!((y[1] + 0.0015).abs() < 1e-15);
    assert_eq!(mc.cost(&[0.0, 0.0], &[1.0]), 1.0);
}

#[test]
fn mountain_car_goal_absorbs_at_zero_cost() {
    let mc = MountainCar::default();
    let g = mc.goal();
    for u in MountainCar::input_list() {
        assert_eq!(mc.step(&g, &u).unwrap(), g.to_vec());
        assert_eq!(mc.cost(&g, &u), 0.0);
    }
    assert!(mc.step(&[0.0, 0.0], &[0.5]).is_err());
}

#[test]
fn equilibria_are_zero_cost_fixed_points() {
    let systems: Vec<Box<dyn ControlSystem>> = vec![
        Box::new(MountainCar::default()),
        Box::new(FiniteSystem::chain3()),
        Box::new(random_system(7, 3, 1)),
        Box::new(LqrSystem::scalar(1.2, 1.0, 1.0, 0.5).unwrap()),
    ];
    for sys in &systems {
        let (xe, ue) = sys.equilibrium();
        assert_eq!(sys.step(&xe, &ue).unwrap(), xe);
        assert_eq!(sys.cost(&xe, &ue), 0.0);
    }
}

#[test]
fn lqr_step_and_cost() {
    let sys = LqrSystem::scalar(2.0, 0.5, 3.0, 4.0).unwrap();
    assert_eq!(sys.step(&[1.0], &[2.0]).unwrap(), vec![3.0]);
    assert_eq!(sys.cost(&[1.0], &[2.0]), 3.0 + 16.0);
    assert!(sys.step(&[1.0, 0.0], &[2.0]).is_err());
}

#[test]
fn finite_system_rejects_bad_tables() {
    assert!(FiniteSystem::new(vec![vec![1]], vec![vec![0.0]], (0, 0)).is_err());
    assert!(FiniteSystem::new(vec![vec![0]], vec![vec![-1.0]], (0, 0)).is_err());
    assert!(FiniteSystem::new(vec![vec![0], vec![0]], vec![vec![0.0], vec![1.0]], (1, 0)).is_err());
}

#[test]
fn discount_validation() {
    assert!(apply_discount(1.5).is_err());
    assert!(apply_discount(-0.1).is_err());
    assert_eq!(apply_discount(1.0).unwrap(), Criterion::total_cost());
}

#[test]
fn zero_discount_keeps_only_stage_cost() {
    let sys = random_system(6, 3, 4);
    let sol = value_iteration(&sys, apply_discount(0.0).unwrap(), 1e-12, 1000).unwrap();
    for (x, u) in sys.pairs() {
        assert_eq!(sol.q[x][u], sys.cost[x][u]);
    }
}

#[test]
fn discounted_geometric_value() {
    // State 1: stay for cost 1, or pay 20 to reach the equilibrium.
    let sys = FiniteSystem::new(vec![vec![0, 0], vec![1, 0]], vec![vec![0.0, 0.0], vec![1.0, 20.0]], (0, 0)).unwrap();
    let sol = value_iteration(&sys, apply_discount(0.9).unwrap(), 1e-13, 100_000).unwrap();
    assert!((sol.j[1] - 10.0).abs() < 1e-9);
    assert_eq!(sol.policy[1], 0);
}

#[test]
fn spp_target_states_pay_terminal_cost_once() {
    let spp = to_total_cost_spp(FiniteSystem::chain3(), |_| true, |x| 0.5 + x[0], 1.0).unwrap();
    for x in 0..3 {
        let lx = spp.lift(&FiniteSystem::state(x));
        for u in 0..2 {
            let us = FiniteSystem::state(u);
            assert_eq!(spp.cost(&lx, &us), 0.5 + x as f64);
            let y = spp.step(&lx, &us).unwrap();
            assert!(spp.is_graveyard(&y));
            assert_eq!(spp.cost(&y, &us), 0.0);
            assert_eq!(spp.step(&y, &us).unwrap(), spp.graveyard());
        }
    }
    let (ge, ue) = spp.equilibrium();
    assert_eq!(spp.step(&ge, &ue).unwrap(), ge);
}

#[test]
fn spp_total_cost_matches_stopped_sum() {
    let inner = random_system(6, 2, 9);
    let target = |x: &[f64]| x[0] as usize == 2 || x[0] as usize == 0;
    let terminal = |x: &[f64]| 3.0 * x[0];
    let spp = to_total_cost_spp(inner.clone(), target, terminal, 1.0).unwrap();
    for start in 0..6 {
        for pattern in 0..16u32 {
            let us: Vec<usize> = (0..12).map(|k| ((pattern >> (k % 4)) & 1) as usize).collect();
            // Direct: stage costs until the first visit to the target, then the terminal cost.
            let (mut direct, mut reached) = (0.0, false);
            let mut x = start;
            for &u in &us {
                if target(&[x as f64]) {
                    direct += terminal(&[x as f64]);
                    reached = true;
                    break;
                }
                direct += inner.cost[x][u];
                x = inner.next[x][u];
            }
            let mut lifted = 0.0;
            let mut y = spp.lift(&[start as f64]);
            for &u in &us {
                lifted += spp.cost(&y, &[u as f64]);
                y = spp.step(&y, &[u as f64]).unwrap();
            }
            if reached {
                assert!((direct - lifted).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn finite_horizon_rejects_zero_horizon() {
    assert!(to_total_cost_finite_horizon(FiniteSystem::chain3(), 0).is_err());
}

#[test]
fn finite_horizon_value_matches_enumeration() {
    let inner = random_system(3, 2, 21);
    let horizon = 2;
    let fh = to_total_cost_finite_horizon(inner.clone(), horizon).unwrap();
    let starts: Vec<Vec<f64>> = (0..3).map(|x| fh.at_clock(&[x as f64], 0)).collect();
    let table = FiniteSystem::tabulate(&fh, &starts).unwrap();
    let sol = value_iteration(&table, Criterion::total_cost(), 1e-13, 10_000).unwrap();
    let labels = table.labels.as_ref().unwrap();
    for x in 0..3 {
        // Stage costs at clocks 0..=K, every input sequence of length K + 1.
        let mut best = f64::INFINITY;
        for seq in 0..(1usize << (horizon + 1)) {
            let (mut s, mut total) = (x, 0.0);
            for k in 0..=horizon {
                let u = (seq >> k) & 1;
                total += inner.cost[s][u];
                s = inner.next[s][u];
            }
            best = best.min(total);
        }
        let i = labels.iter().position(|l| *l == fh.at_clock(&[x as f64], 0)).unwrap();
        assert!((sol.j[i] - best).abs() < 1e-12, "x = {x}: {} vs {best}", sol.j[i]);
        let last = labels.iter().position(|l| *l == fh.at_clock(&[x as f64], horizon));
        if let Some(i) = last {
            let stage = (0..2).map(|u| inner.cost[x][u]).fold(f64::INFINITY, f64::min);
            assert!((sol.j[i] - stage).abs() < 1e-12);
        }
    }
}

#[test]
fn finite_horizon_clock_saturates() {
    let fh = to_total_cost_finite_horizon(FiniteSystem::chain3(), 3).unwrap();
    let mut x = fh.at_clock(&[2.0], 0);
    for k in 1..10 {
        x = fh.step(&x, &[1.0]).unwrap();
        assert_eq!(fh.clock(&x), k.min(4));
    }
    assert_eq!(fh.cost(&x, &[1.0]), 0.0);
}

proptest! {
    #[test]
    fn mountain_car_stays_in_box(
        z in -1.2f64..0.5,
        v in -0.07f64..0.07,
        inputs in proptest::collection::vec(prop::bool::ANY, 1..200),
    ) {
        let mc = MountainCar::default();
        let mut x = vec![z, v];
        for right in inputs {
            let u = [if right { 1.0 } else { -1.0 }];
            prop_assert!(mc.cost(&x, &u) >= 0.0);
            x = mc.step(&x, &u).unwrap();
            prop_assert!(x[0] >= mc.z_min && x[0] <= mc.z_goal);
            prop_assert!(x[1].abs() <= mc.v_bar);
        }
    }

    #[test]
    fn lqr_cost_is_nonnegative(x in -10.0f64..10.0, u in -10.0f64..10.0) {
        let sys = LqrSystem::scalar(1.1, 0.3, 2.0, 0.1).unwrap();
        prop_assert!(sys.cost(&[x], &[u]) >= 0.0);
        let boxed = matches!(sys.inputs(&[x]), InputSet::Box { .. });
        prop_assert!(boxed);
    }
}
