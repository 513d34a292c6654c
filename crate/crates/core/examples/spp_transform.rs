//! Shortest-path and finite-horizon problems recast in total-cost form.

use cvxq::env::{to_total_cost_finite_horizon, to_total_cost_spp, Criterion, FiniteSystem};
use cvxq::oracles::value_iteration;

fn main() -> cvxq::Result<()> {
    let inner = FiniteSystem::new(
        vec![vec![0, 0], vec![0, 2], vec![1, 3], vec![2, 1]],
        vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![1.0, 0.2], vec![1.0, 0.2]],
        (0, 0),
    )?;

    // Stop on reaching state 3 and pay 10 − 2x there.
    let spp = to_total_cost_spp(inner.clone(), |x| x[0] == 3.0, |x| 10.0 - 2.0 * x[0], 1.0)?;
    let starts: Vec<Vec<f64>> = (0..4).map(|x| spp.lift(&[x as f64])).collect();
    let table = FiniteSystem::tabulate(&spp, &starts)?;
    let sol = value_iteration(&table, Criterion::total_cost(), 1e-13, 10_000)?;
    let labels = table.labels.clone().unwrap_or_default();
    println!("shortest path ({} lifted states):", table.n_states());
    for (i, l) in labels.iter().enumerate() {
        let tag = if spp.is_graveyard(l) { " (graveyard)" } else { "" };
        println!("  {l:?}{tag}: J = {:.3}", sol.j[i]);
    }

    // Horizon K = 3: costs at clocks 0..=3 count.
    let fh = to_total_cost_finite_horizon(inner, 3)?;
    let starts: Vec<Vec<f64>> = (0..4).map(|x| fh.at_clock(&[x as f64], 0)).collect();
    let table = FiniteSystem::tabulate(&fh, &starts)?;
    let sol = value_iteration(&table, Criterion::total_cost(), 1e-13, 10_000)?;
    let labels = table.labels.clone().unwrap_or_default();
    println!("finite horizon ({} clocked states):", table.n_states());
    for x in 0..4 {
        let i = labels.iter().position(|l| *l == fh.at_clock(&[x as f64], 0)).unwrap();
        println!("  x = {x}, clock 0: J = {:.3}", sol.j[i]);
    }
    Ok(())
}
