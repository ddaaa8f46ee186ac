//! The l1 program on two small instances: with `G = I` the solution is
//! soft-thresholding of `M`; a correlated 2x2 instance shows the general case.

use nalgebra::{dmatrix, dvector, DMatrix};
use riesz_dml::{solve_rmd, RmdProblem, SolverOptions};

fn main() -> riesz_dml::Result<()> {
    let m = dvector![3.0, -0.5, 1.2, -2.0];
    let lambda = 1.0;
    let prob = RmdProblem::new(DMatrix::identity(4, 4), m.clone(), lambda, f64::INFINITY)?;
    let sol = solve_rmd(&prob, &SolverOptions::default());
    println!("G = I, lambda = {lambda}");
    for (j, (t, mj)) in sol.t_hat.iter().zip(m.iter()).enumerate() {
        let closed = mj.signum() * (mj.abs() - lambda).max(0.0);
        println!("  t[{j}] = {t:>7.4}   soft threshold = {closed:>7.4}");
    }

    let g = dmatrix![2.0, 1.0; 1.0, 2.0];
    let prob = RmdProblem::new(g, dvector![2.0, 2.0], 0.0, f64::INFINITY)?;
    let sol = solve_rmd(&prob, &SolverOptions::default());
    println!("\n2x2, lambda = 0: t = {:?}, ||t||_1 = {:.6}, status {}", sol.t_hat, sol.l1_norm, sol.status);

    // a tight l1 bound makes the program infeasible
    let prob = RmdProblem::new(dmatrix![2.0, 1.0; 1.0, 2.0], dvector![2.0, 2.0], 0.0, 1.0)?;
    println!("same with ||t||_1 <= 1: status {}", solve_rmd(&prob, &SolverOptions::default()).status);
    Ok(())
}
