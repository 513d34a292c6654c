//! Deterministic exploration: probe signals, a relay policy on Mountain Car,
//! ergodic averages along the trajectory and the bins it visits.

use cvxq::approx::{BinnedBasis, BinnedSpec};
use cvxq::env::{LqrSystem, MountainCar};
use cvxq::explore::{ergodic_average, rollout, rollout_with_restarts, LinearFeedback, ProbeSignal, Relay};
use nalgebra::DMatrix;
use std::cell::Cell;
use std::collections::HashSet;

fn main() -> cvxq::Result<()> {
    let probes = [
        ("sinusoids", ProbeSignal::default()),
        (
            "torus map",
            ProbeSignal::MarkovMap {
                init: vec![0.1],
                shift: vec![2f64.sqrt() - 1.0],
            },
        ),
    ];
    for (name, p) in &probes {
        let mut s = p.start();
        let mut xs = Vec::new();
        for _ in 0..8 {
            xs.push(s.current()[0]);
            s.advance();
        }
        println!("{name:>10}: bound {:.2}, first values {xs:+.3?}", p.bound());
    }

    // Scalar LQR under u = −0.5x + ξ: the sample second moments settle.
    let lqr = LqrSystem::scalar(0.9, 1.0, 1.0, 1.0)?;
    let fb = LinearFeedback {
        k: DMatrix::from_element(1, 1, 0.5),
    };
    for n in [100, 1_000, 10_000] {
        let traj = rollout(&lqr, &fb, &ProbeSignal::default(), &[1.0], n)?;
        let m = ergodic_average(&traj, |x, u, _| vec![x[0] * x[0], x[0] * u[0], u[0] * u[0]])?;
        println!("N = {n:>5}: E[x²] {:.5}  E[xu] {:+.5}  E[u²] {:.5}", m[0], m[1], m[2]);
    }

    // Mountain Car: relay on the velocity with a probe, restarting from a
    // spread of positions every 200 steps or at the goal.
    let mc = MountainCar::default();
    let relay = Relay { coord: 1, gain: 0.05 };
    let starts: Vec<Vec<f64>> = (0..20).map(|i| vec![-1.1 + 0.08 * i as f64, 0.0]).collect();
    let steps = Cell::new(0);
    let traj = rollout_with_restarts(&mc, &relay, &ProbeSignal::default(), &starts, 8000, |x| {
        steps.set(steps.get() + 1);
        let restart = mc.at_goal(x) || steps.get() == 200;
        if restart {
            steps.set(0);
        }
        restart
    })?;
    let goals = traj.next.iter().filter(|x| mc.at_goal(x)).count();
    let basis = BinnedBasis::new(BinnedSpec {
        nz: 20,
        nv: 10,
        ..BinnedSpec::default()
    });
    let bins: HashSet<usize> = traj.states.iter().filter_map(|x| basis.bin_index(x)).collect();
    println!(
        "Mountain Car: {} samples, {goals} goal arrivals, {} of {} bins visited",
        traj.len(),
        bins.len(),
        basis.d_j()
    );
    Ok(())
}
