//! Fits the regression and the Riesz representer on one sample and compares
//! them with the truth of a simulated design.

use riesz_dml::simulation::{true_riesz, Dgp, XDist};
use riesz_dml::{estimate_blp, estimate_riesz, Dictionary, DictionaryKind, Functional, LambdaRule, SolverOptions};

fn main() -> riesz_dml::Result<()> {
    let dgp = Dgp::SparseLinear {
        dim: 10,
        dictionary: DictionaryKind::Identity,
        beta_star: vec![1.0, 0.5],
        x_dist: XDist::Normal,
        noise_sd: 0.1,
    };
    let data = dgp.generate(2000, 1)?;
    let dict = Dictionary::identity(10)?;
    let rows: Vec<usize> = (0..data.n()).collect();
    let rule = LambdaRule::default();

    let (beta, blp) = estimate_blp(&data, &rows, &dict, &rule, f64::INFINITY, &SolverOptions::default())?;
    println!("regression: lambda = {:.4}, status {}, {} pivots", blp.lambda, blp.status, blp.iterations);
    println!("  beta_hat[..4] = {:.4?}  (truth 1, 0.5, 0, 0)", &beta.as_slice()[..4]);

    let mut a = vec![0.0; 10];
    a[0] = 1.0;
    let f = Functional::average_derivative(a)?;
    let (rho, riesz) = estimate_riesz(&data, &rows, &dict, &f, &rule, f64::INFINITY, &SolverOptions::default())?;
    println!("riesz: lambda = {:.4}, ||rho||_1 = {:.4}", riesz.lambda, riesz.l1_norm);
    for i in 0..3 {
        let x = data.row(i);
        let fitted = dict.evaluate(x)?.dot(&rho);
        println!("  x = {:>7.3}...  rho'b(x) = {fitted:>7.3}  alpha*(x) = {:>7.3}", x[0], true_riesz(&dgp, &f, x)?);
    }
    Ok(())
}
