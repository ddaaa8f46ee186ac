//! Average treatment effect under confounding, debiased versus plug-in.

use riesz_dml::simulation::Dgp;
use riesz_dml::{dml_estimate, Dictionary, DictionaryKind, DmlOptions, Functional, LambdaRule};

fn main() -> riesz_dml::Result<()> {
    let dgp = Dgp::AteLogistic {
        d_z: 5,
        outcome_coefs: vec![1.0, -0.5, 0.5, 0.0, 0.0],
        tau: 1.0,
        propensity_coefs: vec![1.0, 0.5, 0.0, 0.0, 0.0],
        noise_sd: 1.0,
    };
    let data = dgp.generate(2000, 5)?;
    let dict = Dictionary::treatment_interacted(
        DictionaryKind::Polynomial {
            degree: 2,
            interactions: false,
        },
        6,
        0,
    )?;
    let f = Functional::ate(0);
    let rule = LambdaRule::GaussianQuantile { c: 0.5, alpha: 0.05 };
    let mut opts = DmlOptions {
        blp_lambda: rule,
        riesz_lambda: rule,
        ..DmlOptions::default()
    };

    let debiased = dml_estimate(&data, &dict, &f, &opts)?;
    opts.plug_in_only = true;
    let plug_in = dml_estimate(&data, &dict, &f, &opts)?;

    let treated = (0..data.n()).filter(|&i| data.row(i)[0] == 1.0).count();
    println!("n = {}, treated = {treated}, p = {}", data.n(), dict.output_dim());
    println!("true effect   1.0000");
    println!(
        "debiased      {:.4}  CI [{:.4}, {:.4}]",
        debiased.theta_hat, debiased.ci[0], debiased.ci[1]
    );
    println!("plug-in       {:.4}  CI [{:.4}, {:.4}]", plug_in.theta_hat, plug_in.ci[0], plug_in.ci[1]);
    if !debiased.warnings.is_empty() {
        println!("warnings: {:?}", debiased.warnings);
    }
    Ok(())
}
