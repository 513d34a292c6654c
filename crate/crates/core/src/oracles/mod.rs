//! Exact reference solutions used to check the learning algorithms.

mod certificate;
mod lqr;
mod mc_grid;
mod vi;

pub use certificate::{dplp_certificate, DplpReport};
pub use lqr::{
    are_residual, lqr_q_matrices, lqr_sdp_gridded, riccati_solve, riccati_step, sphere_directions, RiccatiSolution,
    SdpSettings, SdpSolution,
};
pub use mc_grid::{mc_value_iteration, GridSpec, GridValue};
pub use vi::{value_iteration, ValueSolution};
