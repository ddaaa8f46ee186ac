//! Cross-fitted average derivative with a cubic polynomial dictionary.

use riesz_dml::simulation::{true_theta, Dgp, XDist};
use riesz_dml::{dml_estimate, Dictionary, DictionaryKind, DmlOptions, Functional, LambdaRule};

fn main() -> riesz_dml::Result<()> {
    let kind = DictionaryKind::Polynomial {
        degree: 3,
        interactions: true,
    };
    // gamma(x) = x1 + 0.5 x1^2 + 0.3 x1 x2 - 0.2 x2^3 on [-1, 1]^3
    let dict = Dictionary::new(kind.clone(), 3)?;
    let mut beta = vec![0.0; dict.output_dim()];
    let exps = dict.monomial_exponents().expect("polynomial").to_vec();
    for (j, e) in exps.iter().enumerate() {
        beta[j] = match e.as_slice() {
            [1, 0, 0] => 1.0,
            [2, 0, 0] => 0.5,
            [1, 1, 0] => 0.3,
            [0, 3, 0] => -0.2,
            _ => 0.0,
        };
    }
    let dgp = Dgp::SparseLinear {
        dim: 3,
        dictionary: kind,
        beta_star: beta,
        x_dist: XDist::Uniform,
        noise_sd: 0.5,
    };
    let f = Functional::average_derivative(vec![1.0, 0.0, 0.0])?;
    let data = dgp.generate(1000, 42)?;
    let opts = DmlOptions {
        blp_lambda: LambdaRule::GaussianQuantile { c: 0.5, alpha: 0.05 },
        riesz_lambda: LambdaRule::GaussianQuantile { c: 0.5, alpha: 0.05 },
        ..DmlOptions::default()
    };
    let res = dml_estimate(&data, &dict, &f, &opts)?;
    println!("p = {}, n = {}", dict.output_dim(), data.n());
    println!("theta_hat = {:.4}, 95% CI [{:.4}, {:.4}]", res.theta_hat, res.ci[0], res.ci[1]);
    println!("truth     = {:.4}", true_theta(&dgp, &f)?.value);
    println!("per fold  = {:.4?}", res.per_fold_theta);
    println!(
        "orthogonality: |E d_beta psi| = {:.2e}, |E d_rho psi| = {:.2e} (lambdas {:.3}, {:.3})",
        res.orthogonality.d_beta_sup, res.orthogonality.d_rho_sup, res.lambda_used.riesz, res.lambda_used.blp
    );
    Ok(())
}
