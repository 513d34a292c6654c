//! Gridded semidefinite program for LQR compared with the Riccati solution.

use cvxq::env::LqrSystem;
use cvxq::oracles::{lqr_sdp_gridded, riccati_solve, sphere_directions, SdpSettings};
use nalgebra::DMatrix;

fn main() -> cvxq::Result<()> {
    // x⁺ = x + u, c = x² + u²: the value is φx² with φ the golden ratio.
    let scalar = LqrSystem::scalar(1.0, 1.0, 1.0, 1.0)?;
    let sdp = lqr_sdp_gridded(&scalar, &sphere_directions(2, 64), &SdpSettings::default())?;
    println!("scalar: M = {:.12}, golden ratio = {:.12}", sdp.m[(0, 0)], (1.0 + 5f64.sqrt()) / 2.0);

    let f = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.8]);
    let g = DMatrix::from_row_slice(2, 1, &[0.5, 1.0]);
    let s = DMatrix::identity(2, 2);
    let r = DMatrix::from_element(1, 1, 0.5);
    let lqr = LqrSystem::new(f, g, s, r)?;
    let sdp = lqr_sdp_gridded(&lqr, &sphere_directions(3, 64), &SdpSettings::default())?;
    let ric = riccati_solve(&lqr, 1e-13, 100_000)?;
    println!("2x2 SDP value matrix:{}", sdp.m);
    println!("Riccati:{}", ric.m);
    println!(
        "relative error {:.2e}, {} directions ({} cuts), min eig of Q-matrix gap {:.2e}",
        (&sdp.m - &ric.m).norm() / ric.m.norm(),
        sdp.directions,
        sdp.cuts,
        sdp.min_eig
    );
    Ok(())
}
