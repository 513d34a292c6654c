//! Mountain Car end to end from the bundled config: relay exploration with a
//! sinusoidal probe, CQL on the binned basis, comparison with the grid value.
//!
//! Run with `--release`; the grid reference takes a while in debug builds.

use cvxq::cli::{run_config, Config, OracleComparison};

fn main() -> cvxq::Result<()> {
    let mut cfg = Config::parse(include_str!("../configs/mountain_car.toml"), false)?;
    let dir = std::env::temp_dir().join("cvxq_mountain_car");
    cfg.output.dir = dir.clone();
    cfg.output.reference = None;

    let summary = run_config(&cfg)?;
    println!("{} samples, d = {}, status {:?}", summary.samples, summary.dim, summary.status);
    if let Some(OracleComparison::MountainCar {
        median_rel_error,
        visited_bins,
        goal_reached,
        starts,
        steps,
    }) = &summary.oracle
    {
        println!("median relative error of J over {visited_bins} visited bins: {median_rel_error:.3}");
        println!("greedy policy reached the goal from {goal_reached} of {starts} starts");
        let mut sorted = steps.clone();
        sorted.sort_unstable();
        println!("median steps to goal: {}", sorted[sorted.len() / 2]);
    }
    for w in &summary.warnings {
        println!("warning: {w}");
    }
    println!("outputs in {}", dir.display());
    Ok(())
}
