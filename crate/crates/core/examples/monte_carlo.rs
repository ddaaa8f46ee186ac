//! Runs a Monte Carlo experiment from a config file.
//!
//! ```text
//! cargo run --release --example monte_carlo -- configs/experiments/coverage_sparse.toml
//! ```

use std::path::PathBuf;

use riesz_dml::cli::Config;
use riesz_dml::simulation::run_monte_carlo;

fn main() -> riesz_dml::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/simulate_quick.toml"));
    let exp = Config::from_path(&path)?.experiment()?;
    let start = std::time::Instant::now();
    let report = run_monte_carlo(&exp)?;
    println!("{}: R = {}, n = {}", path.display(), report.replications, report.n);
    println!("  truth          {:.5} ({:?})", report.theta_true.value, report.theta_true.method);
    println!("  mean estimate  {:.5}", report.mean_theta_hat);
    println!("  bias           {:+.5}", report.bias);
    println!("  rmse           {:.5}", report.rmse);
    println!("  mean std error {:.5}", report.mean_std_error);
    println!("  coverage       {:.3}", report.coverage);
    println!("  failures       {}", report.failures);
    println!("  elapsed        {:.1?}", start.elapsed());
    Ok(())
}
