//! Cross-fitted debiased estimation of `theta = E m(X, gamma)`.
//!
//! The score is `psi(W, theta; beta, rho) = theta - m(X, b)'beta - rho'b(X) (Y - b(X)'beta)`.
//! For each fold `I_k` the nuisances `beta`, `rho` are fitted on the complement
//! only, `theta_k` solves `E_{I_k} psi = 0`, and the estimate is the unweighted
//! mean of the `theta_k`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::functional::{column_means, Functional};
use crate::rmd::{self, LambdaRule, RmdSolution, SolverOptions, SolverStatus};

/// A partition of `0..n` into `K` folds whose sizes differ by at most one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
    seed: Option<u64>,
}

impl FoldPlan {
    /// Shuffles `0..n` with `seed` and deals the shuffled indices round-robin.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 || n < k {
            return Err(Error::InvalidArgument(format!("need 2 <= K <= n, got K = {k}, n = {n}")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignments = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            assignments[i] = pos % k;
        }
        Ok(FoldPlan {
            k,
            assignments,
            seed: Some(seed),
        })
    }

    /// Fold ids are zero-based.
    pub fn from_assignments(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument("K must be at least 2".into()));
        }
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            if a >= k {
                return Err(Error::InvalidArgument(format!("fold id {a} out of range for K = {k}")));
            }
            sizes[a] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if *lo == 0 || hi - lo > 1 {
            return Err(Error::InvalidArgument(format!(
                "fold sizes must be non-empty and differ by at most one, got {sizes:?}"
            )));
        }
        Ok(FoldPlan {
            k,
            assignments,
            seed: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Plan for the dataset permuted by `order` (row `i` of the new data is row `order[i]`).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_len("permutation", self.n(), order.len())?;
        Self::from_assignments(order.iter().map(|&i| self.assignments[i]).collect(), self.k)
    }

    /// `(evaluation rows I_k, training rows I_k^c)` for fold `k`; always disjoint.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n()).partition(|&i| self.assignments[i] == fold)
    }
}

/// `psi(W, theta; beta, rho)` for one observation given its `b(x)` and `m(x, b)`.
pub fn score_from_parts(y: f64, b: &DVector<f64>, m: &DVector<f64>, theta: f64, beta: &DVector<f64>, rho: &DVector<f64>) -> f64 {
    theta - m.dot(beta) - rho.dot(b) * (y - b.dot(beta))
}

pub fn score_psi(
    y: f64,
    x: &[f64],
    theta: f64,
    beta: &DVector<f64>,
    rho: &DVector<f64>,
    dict: &Dictionary,
    functional: &Functional,
) -> Result<f64> {
    check_len("beta", dict.output_dim(), beta.len())?;
    check_len("rho", dict.output_dim(), rho.len())?;
    let b = dict.evaluate(x)?;
    let m = functional.m_of_basis(dict, x)?;
    Ok(score_from_parts(y, &b, &m, theta, beta, rho))
}

/// `(d psi / d beta, d psi / d rho) = (-m(x, b) + b b'rho, -b (Y - b'beta))`.
pub fn score_derivatives(
    y: f64,
    x: &[f64],
    beta: &DVector<f64>,
    rho: &DVector<f64>,
    dict: &Dictionary,
    functional: &Functional,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_len("beta", dict.output_dim(), beta.len())?;
    check_len("rho", dict.output_dim(), rho.len())?;
    let b = dict.evaluate(x)?;
    let m = functional.m_of_basis(dict, x)?;
    let d_beta = &b * b.dot(rho) - m;
    let d_rho = &b * -(y - b.dot(beta));
    Ok((d_beta, d_rho))
}

/// The root of `E_{I_k} psi = 0`: `E_{I_k}[m(X, b)'beta + rho'b(X) (Y - b(X)'beta)]`.
pub fn fold_theta(
    data: &Dataset,
    rows: &[usize],
    beta: &DVector<f64>,
    rho: &DVector<f64>,
    dict: &Dictionary,
    functional: &Functional,
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyRows("fold estimate"));
    }
    check_len("beta", dict.output_dim(), beta.len())?;
    check_len("rho", dict.output_dim(), rho.len())?;
    let design = dict.design_matrix(data, rows)?;
    let m_rows = functional.m_matrix(dict, data, rows)?;
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| data.y(i)));
    Ok(theta_from_parts(&design, &m_rows, &y, beta, rho))
}

fn theta_from_parts(design: &DMatrix<f64>, m_rows: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, rho: &DVector<f64>) -> f64 {
    let plug_in = m_rows * beta;
    let correction = (design * rho).component_mul(&(y - design * beta));
    (plug_in + correction).mean()
}

/// Sup-norms of the averaged score derivatives over `rows`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Orthogonality {
    pub d_beta_sup: f64,
    pub d_rho_sup: f64,
}

/// `(||E_A d psi/d beta||_inf, ||E_A d psi/d rho||_inf)`. When `beta` and `rho`
/// come from RMD fits on the same rows these equal the fits' residuals.
pub fn orthogonality_report(
    data: &Dataset,
    rows: &[usize],
    dict: &Dictionary,
    functional: &Functional,
    beta: &DVector<f64>,
    rho: &DVector<f64>,
) -> Result<Orthogonality> {
    if rows.is_empty() {
        return Err(Error::EmptyRows("orthogonality report"));
    }
    check_len("beta", dict.output_dim(), beta.len())?;
    check_len("rho", dict.output_dim(), rho.len())?;
    let design = dict.design_matrix(data, rows)?;
    let m_rows = functional.m_matrix(dict, data, rows)?;
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| data.y(i)));
    let (d_beta, d_rho) = mean_derivatives(&design, &m_rows, &y, beta, rho);
    Ok(Orthogonality {
        d_beta_sup: d_beta.amax(),
        d_rho_sup: d_rho.amax(),
    })
}

fn mean_derivatives(design: &DMatrix<f64>, m_rows: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, rho: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = design.nrows() as f64;
    let d_beta = design.tr_mul(&(design * rho)) / n - column_means(m_rows);
    let d_rho = -(design.tr_mul(&(y - design * beta)) / n);
    (d_beta, d_rho)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmlOptions {
    pub folds: usize,
    pub alpha: f64,
    pub blp_lambda: LambdaRule,
    pub riesz_lambda: LambdaRule,
    /// `f64::INFINITY` drops the l1 bound.
    #[serde(with = "crate::json::inf_as_null")]
    pub l1_bound: f64,
    pub seed: u64,
    /// Force `rho = 0`, i.e. the plug-in estimator without debiasing.
    pub plug_in_only: bool,
    pub solver: SolverOptions,
}

impl Default for DmlOptions {
    fn default() -> Self {
        DmlOptions {
            folds: 5,
            alpha: 0.05,
            blp_lambda: LambdaRule::default(),
            riesz_lambda: LambdaRule::default(),
            l1_bound: f64::INFINITY,
            seed: 0,
            plug_in_only: false,
            solver: SolverOptions::default(),
        }
    }
}

/// `sigma_hat` at or below this multiple of `1 + |theta_hat|` is reported as degenerate.
pub const DEGENERATE_SIGMA_REL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DmlWarning {
    /// All scores are equal up to rounding, so the interval has (near) zero width.
    DegenerateVariance,
    /// An averaged score derivative exceeds three times the matching lambda.
    OrthogonalityExceeded,
}

#[derive(Clone, Debug, Serialize)]
pub struct FoldNuisance {
    pub fold: usize,
    pub size: usize,
    pub theta: f64,
    pub beta: RmdSolution,
    /// Absent when the plug-in estimator was requested.
    pub rho: Option<RmdSolution>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaUsed {
    pub blp: f64,
    pub riesz: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DmlResult {
    pub theta_hat: f64,
    pub sigma_hat: f64,
    pub std_error: f64,
    pub ci: [f64; 2],
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub per_fold_theta: Vec<f64>,
    pub per_fold: Vec<FoldNuisance>,
    pub orthogonality: Orthogonality,
    /// Largest lambda over folds (fold sizes differ by at most one).
    pub lambda_used: LambdaUsed,
    pub warnings: Vec<DmlWarning>,
}

/// Cross-fitted estimate with folds drawn from `opts.seed`.
pub fn dml_estimate(data: &Dataset, dict: &Dictionary, functional: &Functional, opts: &DmlOptions) -> Result<DmlResult> {
    if data.n() < 2 * opts.folds {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2K, got n = {} and K = {}",
            data.n(),
            opts.folds
        )));
    }
    let plan = FoldPlan::random(data.n(), opts.folds, opts.seed)?;
    dml_estimate_with_plan(data, dict, functional, &plan, opts)
}

struct FoldFit {
    theta: f64,
    beta: DVector<f64>,
    rho: DVector<f64>,
    beta_sol: RmdSolution,
    rho_sol: Option<RmdSolution>,
    rows: Vec<usize>,
}

/// Cross-fitted estimate for an explicit fold plan. `opts.folds` is ignored.
pub fn dml_estimate_with_plan(
    data: &Dataset,
    dict: &Dictionary,
    functional: &Functional,
    plan: &FoldPlan,
    opts: &DmlOptions,
) -> Result<DmlResult> {
    check_len("fold plan", data.n(), plan.n())?;
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {}", opts.alpha)));
    }
    functional.check_data(dict, data)?;
    let n = data.n();
    let all: Vec<usize> = (0..n).collect();
    let design = dict.design_matrix(data, &all)?;
    let m_rows = functional.m_matrix(dict, data, &all)?;
    let y = DVector::from_column_slice(data.outcome());
    let p = dict.output_dim();

    let fits: Vec<FoldFit> = (0..plan.k())
        .into_par_iter()
        .map(|k| -> Result<FoldFit> {
            let (eval, train) = plan.split(k);
            let train_design = design.select_rows(train.iter());
            let train_y = y.select_rows(train.iter());

            let train_gram = rmd::gram(&train_design);
            let blp_lambda = opts.blp_lambda.lambda(p, train.len())?;
            let beta_sol = rmd::solve_rmd(
                &rmd::blp_problem(&train_design, &train_gram, &train_y, blp_lambda, opts.l1_bound)?,
                &opts.solver,
            );
            if beta_sol.status != SolverStatus::Optimal {
                return Err(Error::FoldSolver {
                    fold: k,
                    nuisance: "blp",
                    status: beta_sol.status,
                });
            }
            let (rho, rho_sol) = if opts.plug_in_only {
                (DVector::zeros(p), None)
            } else {
                let riesz_lambda = opts.riesz_lambda.lambda(p, train.len())?;
                let train_m = m_rows.select_rows(train.iter());
                let sol = rmd::solve_rmd(
                    &rmd::riesz_problem(&train_gram, &train_m, riesz_lambda, opts.l1_bound)?,
                    &opts.solver,
                );
                if sol.status != SolverStatus::Optimal {
                    return Err(Error::FoldSolver {
                        fold: k,
                        nuisance: "riesz",
                        status: sol.status,
                    });
                }
                (sol.coef(), Some(sol))
            };
            let beta = beta_sol.coef();
            let theta = theta_from_parts(
                &design.select_rows(eval.iter()),
                &m_rows.select_rows(eval.iter()),
                &y.select_rows(eval.iter()),
                &beta,
                &rho,
            );
            Ok(FoldFit {
                theta,
                beta,
                rho,
                beta_sol,
                rho_sol,
                rows: eval,
            })
        })
        .collect::<Result<_>>()?;

    let per_fold_theta: Vec<f64> = fits.iter().map(|f| f.theta).collect();
    let theta_hat = per_fold_theta.iter().sum::<f64>() / plan.k() as f64;

    let mut sum_sq = 0.0;
    let mut d_beta = DVector::zeros(p);
    let mut d_rho = DVector::zeros(p);
    let mut first_score = None;
    let mut constant_scores = true;
    for fit in &fits {
        let fold_design = design.select_rows(fit.rows.iter());
        let fold_m = m_rows.select_rows(fit.rows.iter());
        let fold_y = y.select_rows(fit.rows.iter());
        let fitted = &fold_design * &fit.beta;
        let plug_in = &fold_m * &fit.beta;
        let weights = &fold_design * &fit.rho;
        for r in 0..fit.rows.len() {
            let psi = theta_hat - plug_in[r] - weights[r] * (fold_y[r] - fitted[r]);
            sum_sq += psi * psi;
            match first_score {
                None => first_score = Some(psi),
                Some(s) => constant_scores &= psi == s,
            }
        }
        let (db, dr) = mean_derivatives(&fold_design, &fold_m, &fold_y, &fit.beta, &fit.rho);
        let w = fit.rows.len() as f64 / n as f64;
        d_beta += db * w;
        d_rho += dr * w;
    }
    let sigma_hat = (sum_sq / n as f64).sqrt();
    let std_error = sigma_hat / (n as f64).sqrt();
    let z = Normal::standard().inverse_cdf(1.0 - opts.alpha / 2.0);
    let ci = [theta_hat - z * std_error, theta_hat + z * std_error];

    let lambda_used = LambdaUsed {
        blp: fits.iter().map(|f| f.beta_sol.lambda).fold(0.0, f64::max),
        riesz: fits
            .iter()
            .filter_map(|f| f.rho_sol.as_ref().map(|s| s.lambda))
            .fold(0.0, f64::max),
    };
    let orthogonality = Orthogonality {
        d_beta_sup: d_beta.amax(),
        d_rho_sup: d_rho.amax(),
    };
    let mut warnings = Vec::new();
    // scores equal up to rounding in the fitted coefficients count as constant
    if constant_scores || sigma_hat <= DEGENERATE_SIGMA_REL * (1.0 + theta_hat.abs()) {
        warnings.push(DmlWarning::DegenerateVariance);
    }
    if !opts.plug_in_only
        && (orthogonality.d_beta_sup > 3.0 * lambda_used.riesz || orthogonality.d_rho_sup > 3.0 * lambda_used.blp)
    {
        warnings.push(DmlWarning::OrthogonalityExceeded);
    }

    let per_fold = fits
        .into_iter()
        .enumerate()
        .map(|(k, f)| FoldNuisance {
            fold: k,
            size: f.rows.len(),
            theta: f.theta,
            beta: f.beta_sol,
            rho: f.rho_sol,
        })
        .collect();

    Ok(DmlResult {
        theta_hat,
        sigma_hat,
        std_error,
        ci,
        alpha: opts.alpha,
        k: plan.k(),
        n,
        per_fold_theta,
        per_fold,
        orthogonality,
        lambda_used,
        warnings,
    })
}
