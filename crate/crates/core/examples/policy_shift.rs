//! Effect of shifting one covariate, with the density-ratio Riesz representer
//! of the Gaussian design for comparison.

use riesz_dml::simulation::{true_riesz, true_theta, Dgp, XDist};
use riesz_dml::{dml_estimate, Dictionary, DictionaryKind, DmlOptions, Functional, LambdaRule};

fn main() -> riesz_dml::Result<()> {
    let kind = DictionaryKind::Polynomial {
        degree: 2,
        interactions: false,
    };
    let dgp = Dgp::SparseLinear {
        dim: 2,
        dictionary: kind.clone(),
        beta_star: vec![0.0, 1.0, 0.0, 1.0],
        x_dist: XDist::Normal,
        noise_sd: 1.0,
    };
    let f = Functional::location_shift(vec![0.1, 0.0])?;
    let dict = Dictionary::new(kind, 2)?;
    let data = dgp.generate(3000, 11)?;
    let rule = LambdaRule::GaussianQuantile { c: 0.5, alpha: 0.05 };
    let opts = DmlOptions {
        blp_lambda: rule,
        riesz_lambda: rule,
        ..DmlOptions::default()
    };
    let res = dml_estimate(&data, &dict, &f, &opts)?;
    println!("theta_hat = {:.4}  CI [{:.4}, {:.4}]", res.theta_hat, res.ci[0], res.ci[1]);
    println!("truth     = {:.4}", true_theta(&dgp, &f)?.value);

    // the fitted representer is a quadratic; the true one is exp(0.1 x1 - 0.005) - 1
    let rho = res.per_fold[0].rho.as_ref().expect("debiased fit").coef();
    for x1 in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let x = [x1, 0.0];
        println!(
            "  x1 = {x1:>4}: fitted {:>7.4}  true {:>7.4}",
            dict.evaluate(&x)?.dot(&rho),
            true_riesz(&dgp, &f, &x)?
        );
    }
    Ok(())
}
