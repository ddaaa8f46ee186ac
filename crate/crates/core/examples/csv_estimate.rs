//! Estimation from a CSV file, the library equivalent of
//! `riesz-dml estimate --config configs/ate_example.toml`.

use std::path::Path;

use riesz_dml::{dml_estimate, Dataset, Dictionary, DictionaryKind, DmlOptions, Functional, LambdaRule};

fn main() -> riesz_dml::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ate_example.csv");
    let data = Dataset::from_csv_path(&path, "y", Some("d"))?;
    println!("{} rows, covariates {:?}", data.n(), data.names());

    let dict = Dictionary::treatment_interacted(
        DictionaryKind::Polynomial {
            degree: 2,
            interactions: false,
        },
        data.dim(),
        0,
    )?;
    let rule = LambdaRule::GaussianQuantile { c: 0.5, alpha: 0.05 };
    let opts = DmlOptions {
        blp_lambda: rule,
        riesz_lambda: rule,
        seed: 7,
        ..DmlOptions::default()
    };
    let res = dml_estimate(&data, &dict, &Functional::ate(0), &opts)?;
    println!("{}", riesz_dml::json::to_string(&res)?);
    Ok(())
}
