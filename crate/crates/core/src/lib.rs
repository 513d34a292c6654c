pub mod algos;
pub mod approx;
pub mod cli;
pub mod env;
pub mod error;
pub mod explore;
pub mod linalg;
pub mod losses;
pub mod mdpx;
pub mod oracles;
pub mod qpcore;

pub use error::{Error, Result};
