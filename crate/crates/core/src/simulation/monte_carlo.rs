use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::Dgp;
use super::truth::{true_theta, TrueTheta};
use crate::dictionary::{Dictionary, DictionaryKind};
use crate::dml::{dml_estimate, DmlOptions, DmlResult, DmlWarning};
use crate::error::{Error, Result};
use crate::functional::Functional;

/// A Monte Carlo design: data law, estimator, and replication plan.
#[derive(Clone, Debug, Serialize)]
pub struct Experiment {
    pub dgp: Dgp,
    pub dictionary: DictionaryKind,
    pub functional: Functional,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub estimator: DmlOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub data_seed: u64,
    pub fold_seed: u64,
    pub theta_hat: f64,
    pub sigma_hat: f64,
    pub std_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub covered: bool,
    /// Largest `||G t - M||_inf - lambda` over all fits of the replication.
    pub max_constraint_excess: f64,
    pub d_beta_sup: f64,
    pub d_rho_sup: f64,
    pub degenerate_variance: bool,
    pub orthogonality_warning: bool,
    /// Set when the replication failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloReport {
    #[serde(rename = "R")]
    pub replications: usize,
    pub n: usize,
    pub seed: u64,
    pub theta_true: TrueTheta,
    pub failures: usize,
    pub mean_theta_hat: f64,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_ci_length: f64,
    pub mean_std_error: f64,
    pub sd_theta_hat: f64,
    pub max_constraint_excess: f64,
    pub records: Vec<ReplicationRecord>,
    pub experiment: Experiment,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds for replication `rep`: `(data, folds)`. The data seed is
/// `splitmix64(seed ^ splitmix64(rep))` and the fold seed is `splitmix64` of the data seed,
/// so each replication depends only on `(seed, rep)`.
pub fn replication_seeds(seed: u64, rep: usize) -> (u64, u64) {
    let data = splitmix64(seed ^ splitmix64(rep as u64));
    (data, splitmix64(data))
}

fn max_excess(result: &DmlResult) -> f64 {
    result
        .per_fold
        .iter()
        .flat_map(|f| std::iter::once(&f.beta).chain(f.rho.as_ref()))
        .map(|s| s.max_residual - s.lambda)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn replicate(exp: &Experiment, dict: &Dictionary, theta_true: f64, rep: usize) -> ReplicationRecord {
    let (data_seed, fold_seed) = replication_seeds(exp.seed, rep);
    let opts = DmlOptions {
        seed: fold_seed,
        ..exp.estimator.clone()
    };
    let outcome = exp
        .dgp
        .generate(exp.n, data_seed)
        .and_then(|data| dml_estimate(&data, dict, &exp.functional, &opts));
    match outcome {
        Ok(r) => ReplicationRecord {
            rep,
            data_seed,
            fold_seed,
            theta_hat: r.theta_hat,
            sigma_hat: r.sigma_hat,
            std_error: r.std_error,
            ci_lower: r.ci[0],
            ci_upper: r.ci[1],
            covered: r.ci[0] <= theta_true && theta_true <= r.ci[1],
            max_constraint_excess: max_excess(&r),
            d_beta_sup: r.orthogonality.d_beta_sup,
            d_rho_sup: r.orthogonality.d_rho_sup,
            degenerate_variance: r.warnings.contains(&DmlWarning::DegenerateVariance),
            orthogonality_warning: r.warnings.contains(&DmlWarning::OrthogonalityExceeded),
            error: None,
        },
        Err(e) => ReplicationRecord {
            rep,
            data_seed,
            fold_seed,
            theta_hat: f64::NAN,
            sigma_hat: f64::NAN,
            std_error: f64::NAN,
            ci_lower: f64::NAN,
            ci_upper: f64::NAN,
            covered: false,
            max_constraint_excess: f64::NAN,
            d_beta_sup: f64::NAN,
            d_rho_sup: f64::NAN,
            degenerate_variance: false,
            orthogonality_warning: false,
            error: Some(e.to_string()),
        },
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Runs the replications in parallel; failed replications are recorded, not fatal.
/// Aggregates are over successful replications. The report is identical for any
/// thread count.
pub fn run_monte_carlo(exp: &Experiment) -> Result<MonteCarloReport> {
    if exp.replications == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    exp.dgp.validate()?;
    let dict = Dictionary::new(exp.dictionary.clone(), exp.dgp.dim())?;
    exp.functional.check_compatible(&dict)?;
    let truth = true_theta(&exp.dgp, &exp.functional)?;

    let records: Vec<ReplicationRecord> = (0..exp.replications)
        .into_par_iter()
        .map(|rep| replicate(exp, &dict, truth.value, rep))
        .collect();

    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let errors = || ok.iter().map(|r| r.theta_hat - truth.value);
    let bias = mean(errors());
    let variance = mean(errors().map(|e| (e - bias) * (e - bias)));
    // sqrt(bias^2 + var) keeps rmse >= |bias| exactly in floating point
    let rmse = (bias * bias + variance).sqrt();
    let mean_theta_hat = mean(ok.iter().map(|r| r.theta_hat));
    let sd_theta_hat = if ok.len() > 1 {
        (variance * ok.len() as f64 / (ok.len() - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(MonteCarloReport {
        replications: exp.replications,
        n: exp.n,
        seed: exp.seed,
        theta_true: truth,
        failures: records.len() - ok.len(),
        mean_theta_hat,
        bias,
        rmse,
        coverage: mean(ok.iter().map(|r| f64::from(u8::from(r.covered)))),
        mean_ci_length: mean(ok.iter().map(|r| r.ci_upper - r.ci_lower)),
        mean_std_error: mean(ok.iter().map(|r| r.std_error)),
        sd_theta_hat,
        max_constraint_excess: ok.iter().map(|r| r.max_constraint_excess).fold(f64::NEG_INFINITY, f64::max),
        records,
        experiment: exp.clone(),
    })
}

/// One CSV row per replication; floats use the same 17-digit format as the JSON output.
pub fn write_records_csv<W: Write>(records: &[ReplicationRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "rep",
        "data_seed",
        "fold_seed",
        "theta_hat",
        "sigma_hat",
        "std_error",
        "ci_lower",
        "ci_upper",
        "covered",
        "max_constraint_excess",
        "d_beta_sup",
        "d_rho_sup",
        "degenerate_variance",
        "orthogonality_warning",
        "error",
    ])?;
    let fmt = |v: f64| if v.is_finite() { format!("{v:.16e}") } else { "NaN".to_string() };
    for r in records {
        w.write_record([
            r.rep.to_string(),
            r.data_seed.to_string(),
            r.fold_seed.to_string(),
            fmt(r.theta_hat),
            fmt(r.sigma_hat),
            fmt(r.std_error),
            fmt(r.ci_lower),
            fmt(r.ci_upper),
            r.covered.to_string(),
            fmt(r.max_constraint_excess),
            fmt(r.d_beta_sup),
            fmt(r.d_rho_sup),
            r.degenerate_variance.to_string(),
            r.orthogonality_warning.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmd::LambdaRule;
    use crate::simulation::dgp::XDist;

    fn experiment(noise_sd: f64, replications: usize) -> Experiment {
        Experiment {
            dgp: Dgp::SparseLinear {
                dim: 2,
                dictionary: DictionaryKind::Identity,
                beta_star: vec![1.0, 0.5],
                x_dist: XDist::Normal,
                noise_sd,
            },
            dictionary: DictionaryKind::Identity,
            functional: Functional::average_derivative(vec![1.0, 0.0]).unwrap(),
            n: 100,
            replications,
            seed: 9,
            estimator: DmlOptions {
                folds: 2,
                blp_lambda: LambdaRule::Fixed { value: 0.0 },
                riesz_lambda: LambdaRule::Fixed { value: 0.05 },
                ..DmlOptions::default()
            },
        }
    }

    #[test]
    fn single_replication_is_echoed() {
        let report = run_monte_carlo(&experiment(1.0, 1)).unwrap();
        let r = &report.records[0];
        assert_eq!(report.failures, 0);
        assert_eq!(report.mean_theta_hat, r.theta_hat);
        assert_eq!(report.bias, r.theta_hat - 1.0);
        assert_eq!(report.mean_ci_length, r.ci_upper - r.ci_lower);
        assert!(report.rmse >= report.bias.abs());
    }

    #[test]
    fn noiseless_recovery() {
        let report = run_monte_carlo(&experiment(0.0, 4)).unwrap();
        assert!(report.bias.abs() <= 1e-6 && report.rmse <= 1e-6, "{report:?}");
    }

    #[test]
    fn seeds_depend_only_on_rep() {
        assert_eq!(replication_seeds(3, 7), replication_seeds(3, 7));
        assert_ne!(replication_seeds(3, 7).0, replication_seeds(3, 8).0);
        assert_ne!(replication_seeds(3, 7).0, replication_seeds(4, 7).0);
    }

    #[test]
    fn failures_are_recorded() {
        let mut exp = experiment(1.0, 2);
        exp.estimator.riesz_lambda = LambdaRule::Fixed { value: 0.0 };
        exp.estimator.l1_bound = 1e-3;
        let report = run_monte_carlo(&exp).unwrap();
        assert_eq!(report.failures, 2);
        assert!(report.records.iter().all(|r| r.error.is_some()));
        let mut buf = Vec::new();
        write_records_csv(&report.records, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }
}
