//! Run configuration.
//!
//! A config is a TOML file of `key = value` lines; `#` starts a comment. Nested
//! settings are written with dotted keys (`dictionary.type = "polynomial"`) or,
//! equivalently, inline tables (`dictionary = { type = "polynomial", degree = 2 }`).
//!
//! | key | used by | meaning |
//! |-----|---------|---------|
//! | `data` | estimate | CSV path; `--data` overrides |
//! | `outcome` | estimate | outcome column name |
//! | `treatment` | estimate | binary treatment column name (optional) |
//! | `standardize` | estimate | scale non-treatment covariates to unit variance (default `false`) |
//! | `output` | both | JSON output path; `--out` overrides; stdout when absent |
//! | `csv` | simulate | per-replication CSV path; `--csv` overrides |
//! | `dictionary` | both | `type` = `polynomial` (`degree`, `interactions`), `fourier` (`order`), `identity`, or `treatment_interacted` (`inner`, `treatment_index`) |
//! | `functional` | both | `type` = `average_derivative` (`direction`), `policy_shift` (`transport_s` row-major, default identity; `transport_c`), or `ate` |
//! | `folds` | both | number of cross-fitting folds, default 5 |
//! | `alpha` | both | confidence level is `1 - alpha`, default 0.05 |
//! | `lambda` | both | `rule` = `gaussian_quantile` (`c`, `alpha`) or `fixed` (`value`) |
//! | `lambda_blp`, `lambda_riesz` | both | per-fit overrides of `lambda` |
//! | `l1_bound` | both | optional bound on the l1 norm of both fits |
//! | `seed` | both | fold assignment seed (estimate) or Monte Carlo seed (simulate) |
//! | `plug_in_only` | both | skip the Riesz fit (default `false`) |
//! | `solver` | both | `backend`, `max_iters`, `feas_tol`, `opt_tol_abs`, `opt_tol_rel`, `pivot_rule` |
//! | `dgp` | simulate | data-generating process, `type` = `sparse_linear`, `ate_logistic`, or `dense_decay` |
//! | `n`, `replications` | simulate | sample size and number of replications |
//!
//! Relative paths in a config file are resolved against the file's directory;
//! paths given on the command line are resolved against the working directory.
//!
//! Covariates for `estimate` are all CSV columns other than the outcome, in file
//! order; the treatment column stays among them.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, DictionaryKind};
use crate::dml::DmlOptions;
use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::rmd::{LambdaRule, SolverOptions};
use crate::simulation::{Dgp, Experiment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    AverageDerivative {
        direction: Vec<f64>,
    },
    PolicyShift {
        #[serde(default)]
        transport_s: Option<Vec<f64>>,
        transport_c: Vec<f64>,
    },
    /// Uses the configured treatment column.
    Ate,
}

impl FunctionalSpec {
    /// Resolves against covariate dimension `dim` and the treatment column, if any.
    pub fn resolve(&self, dim: usize, treatment_col: Option<usize>) -> Result<Functional> {
        let f = match self {
            FunctionalSpec::AverageDerivative { direction } => {
                if direction.len() != dim {
                    return Err(Error::config(
                        "functional.direction",
                        format!("expected {dim} entries, got {}", direction.len()),
                    ));
                }
                Functional::average_derivative(direction.clone())
            }
            FunctionalSpec::PolicyShift {
                transport_s,
                transport_c,
            } => {
                if transport_c.len() != dim {
                    return Err(Error::config(
                        "functional.transport_c",
                        format!("expected {dim} entries, got {}", transport_c.len()),
                    ));
                }
                match transport_s {
                    Some(s) if s.len() != dim * dim => {
                        return Err(Error::config(
                            "functional.transport_s",
                            format!("expected {} entries, got {}", dim * dim, s.len()),
                        ))
                    }
                    Some(s) => Functional::policy_shift(s.clone(), transport_c.clone()),
                    None => Functional::location_shift(transport_c.clone()),
                }
            }
            FunctionalSpec::Ate => match treatment_col {
                Some(col) => Ok(Functional::ate(col)),
                None => return Err(Error::config("treatment", "the ate functional needs a treatment column")),
            },
        };
        f.map_err(|e| Error::config("functional", e.to_string()))
    }
}

/// Every recognised setting, echoed verbatim in command output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Config {
    pub data: Option<PathBuf>,
    pub outcome: Option<String>,
    pub treatment: Option<String>,
    pub standardize: bool,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub dictionary: DictionaryKind,
    pub functional: FunctionalSpec,
    pub folds: usize,
    pub alpha: f64,
    pub lambda: LambdaRule,
    pub lambda_blp: Option<LambdaRule>,
    pub lambda_riesz: Option<LambdaRule>,
    pub l1_bound: Option<f64>,
    pub seed: u64,
    pub plug_in_only: bool,
    pub solver: SolverOptions,
    pub dgp: Option<Dgp>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
}

const KEYS: &[&str] = &[
    "data",
    "outcome",
    "treatment",
    "standardize",
    "output",
    "csv",
    "dictionary",
    "functional",
    "folds",
    "alpha",
    "lambda",
    "lambda_blp",
    "lambda_riesz",
    "l1_bound",
    "seed",
    "plug_in_only",
    "solver",
    "dgp",
    "n",
    "replications",
];

fn take<T: DeserializeOwned>(table: &mut toml::Table, key: &str) -> Result<Option<T>> {
    table
        .remove(key)
        .map(|v| v.try_into::<T>().map_err(|e| Error::config(key, e.to_string().trim().to_string())))
        .transpose()
}

fn required<T: DeserializeOwned>(table: &mut toml::Table, key: &str) -> Result<T> {
    take(table, key)?.ok_or_else(|| Error::config(key, "missing required key"))
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        if let Some(unknown) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::config(unknown.clone(), "unknown key"));
        }
        let config = Config {
            data: take(&mut table, "data")?,
            outcome: take(&mut table, "outcome")?,
            treatment: take(&mut table, "treatment")?,
            standardize: take(&mut table, "standardize")?.unwrap_or(false),
            output: take(&mut table, "output")?,
            csv: take(&mut table, "csv")?,
            dictionary: required(&mut table, "dictionary")?,
            functional: required(&mut table, "functional")?,
            folds: take(&mut table, "folds")?.unwrap_or(5),
            alpha: take(&mut table, "alpha")?.unwrap_or(0.05),
            lambda: take(&mut table, "lambda")?.unwrap_or_default(),
            lambda_blp: take(&mut table, "lambda_blp")?,
            lambda_riesz: take(&mut table, "lambda_riesz")?,
            l1_bound: take(&mut table, "l1_bound")?,
            seed: take::<i64>(&mut table, "seed")?
                .map(|s| u64::try_from(s).map_err(|_| Error::config("seed", "must be non-negative")))
                .transpose()?
                .unwrap_or(0),
            plug_in_only: take(&mut table, "plug_in_only")?.unwrap_or(false),
            solver: take(&mut table, "solver")?.unwrap_or_default(),
            dgp: take(&mut table, "dgp")?,
            n: take(&mut table, "n")?,
            replications: take(&mut table, "replications")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config("folds", "must be at least 2"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must be in (0, 1)"));
        }
        for (key, rule) in [
            ("lambda", Some(&self.lambda)),
            ("lambda_blp", self.lambda_blp.as_ref()),
            ("lambda_riesz", self.lambda_riesz.as_ref()),
        ] {
            if let Some(rule) = rule {
                rule.lambda(1, 1).map_err(|e| Error::config(key, e.to_string()))?;
            }
        }
        if let Some(b) = self.l1_bound {
            if !(b > 0.0) {
                return Err(Error::config("l1_bound", "must be positive"));
            }
        }
        if let Some(dgp) = &self.dgp {
            dgp.validate().map_err(|e| Error::config("dgp", e.to_string()))?;
        }
        Ok(())
    }

    pub fn dml_options(&self) -> DmlOptions {
        DmlOptions {
            folds: self.folds,
            alpha: self.alpha,
            blp_lambda: self.lambda_blp.unwrap_or(self.lambda),
            riesz_lambda: self.lambda_riesz.unwrap_or(self.lambda),
            l1_bound: self.l1_bound.unwrap_or(f64::INFINITY),
            seed: self.seed,
            plug_in_only: self.plug_in_only,
            solver: self.solver.clone(),
        }
    }

    /// The Monte Carlo design described by the `dgp`, `n`, and `replications` keys.
    pub fn experiment(&self) -> Result<Experiment> {
        let dgp = self.dgp.clone().ok_or_else(|| Error::config("dgp", "missing required key"))?;
        let n = self.n.ok_or_else(|| Error::config("n", "missing required key"))?;
        let replications = self
            .replications
            .ok_or_else(|| Error::config("replications", "missing required key"))?;
        if n < 2 * self.folds {
            return Err(Error::config("n", "must be at least twice the number of folds"));
        }
        if replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        let dict = Dictionary::new(self.dictionary.clone(), dgp.dim()).map_err(|e| Error::config("dictionary", e.to_string()))?;
        let functional = self.functional.resolve(dgp.dim(), dgp.treatment_col())?;
        functional
            .check_compatible(&dict)
            .map_err(|e| Error::config("functional", e.to_string()))?;
        Ok(Experiment {
            dgp,
            dictionary: self.dictionary.clone(),
            functional,
            n,
            replications,
            seed: self.seed,
            estimator: self.dml_options(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        # comment
        outcome = "y"
        dictionary.type = "polynomial"
        dictionary.degree = 2
        functional = { type = "average_derivative", direction = [1.0, 0.0] }
    "#;

    #[test]
    fn dotted_and_inline_keys() {
        let c = Config::from_toml_str(MINIMAL).unwrap();
        assert_eq!(
            c.dictionary,
            DictionaryKind::Polynomial {
                degree: 2,
                interactions: false
            }
        );
        assert_eq!(c.folds, 5);
        assert_eq!(c.dml_options().riesz_lambda, LambdaRule::default());
    }

    #[test]
    fn errors_name_the_key() {
        let key_of = |text: &str| match Config::from_toml_str(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(key_of(&format!("{MINIMAL}\nfolds = 1")), "folds");
        assert_eq!(key_of(&format!("{MINIMAL}\nalpah = 0.1")), "alpah");
        assert_eq!(key_of(&format!("{MINIMAL}\nlambda = {{ rule = \"fixed\", value = -1.0 }}")), "lambda");
        assert_eq!(key_of("functional.type = \"ate\""), "dictionary");
        assert_eq!(key_of(&format!("{MINIMAL}\nseed = -3")), "seed");
    }

    #[test]
    fn functional_resolution() {
        let spec = FunctionalSpec::PolicyShift {
            transport_s: None,
            transport_c: vec![0.1, 0.0],
        };
        assert_eq!(spec.resolve(2, None).unwrap(), Functional::location_shift(vec![0.1, 0.0]).unwrap());
        assert!(spec.resolve(3, None).is_err());
        assert!(FunctionalSpec::Ate.resolve(2, None).is_err());
        assert_eq!(FunctionalSpec::Ate.resolve(2, Some(1)).unwrap(), Functional::ate(1));
    }
}
