//! Regenerates `data/ate_example.csv` from a fixed treatment design.

use std::path::Path;

use riesz_dml::simulation::Dgp;

fn main() -> riesz_dml::Result<()> {
    let dgp = Dgp::AteLogistic {
        d_z: 3,
        outcome_coefs: vec![1.0, -0.5, 0.25],
        tau: 1.0,
        propensity_coefs: vec![0.8, -0.4, 0.0],
        noise_sd: 1.0,
    };
    let data = dgp.generate(400, 2024)?;
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ate_example.csv");
    data.write_csv(std::fs::File::create(&path)?)?;
    println!("wrote {} rows to {}", data.n(), path.display());
    Ok(())
}
