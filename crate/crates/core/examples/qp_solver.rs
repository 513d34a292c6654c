//! The ADMM quadratic-program solver on a small problem with every constraint type.

use cvxq::linalg::csr_from_dense;
use cvxq::qpcore::{solve_qp, QpSettings, QuadraticProgram};
use nalgebra::{DMatrix, DVector};

fn main() -> cvxq::Result<()> {
    // minimize ½‖θ‖² − θ₀ − 2θ₁ − 3θ₂  s.t.  θ₀ + θ₁ + θ₂ = 2,  θ₀ − θ₂ ≤ 0.5,  0 ≤ θ ≤ 1
    let prob = QuadraticProgram::new(DMatrix::identity(3, 3), DVector::from_column_slice(&[-1.0, -2.0, -3.0]))
        .with_equalities(csr_from_dense(&DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0])), DVector::from_element(1, 2.0))
        .with_inequalities(csr_from_dense(&DMatrix::from_row_slice(1, 3, &[1.0, 0.0, -1.0])), DVector::from_element(1, 0.5))
        .with_bounds(DVector::zeros(3), DVector::from_element(3, 1.0));
    let sol = solve_qp(&prob, &QpSettings::default())?;
    println!("status     {:?} after {} iterations (polished: {})", sol.status, sol.iterations, sol.polished);
    println!("theta      {:.8?}", sol.theta.as_slice());
    println!("objective  {:.8}", sol.objective);
    println!("y_eq {:.6?}  y_in {:.6?}  y_box {:.6?}", sol.y_eq.as_slice(), sol.y_in.as_slice(), sol.y_box.as_slice());
    println!(
        "KKT: primal {:.1e}, stationarity {:.1e}, complementarity {:.1e}",
        sol.kkt.primal, sol.kkt.stationarity, sol.kkt.complementarity
    );
    Ok(())
}
