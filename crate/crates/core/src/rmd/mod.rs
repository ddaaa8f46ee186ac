//! Regularized minimum distance: `min ||t||_1  s.t.  ||G t - M||_inf <= lambda, ||t||_1 <= B`.
//!
//! The residual convention is `g(t) = G t - M`. The best-linear-predictor fit uses
//! `M = E_A[Y b(X)]` and the Riesz representer fit uses `M = E_A[m(X, b)]`, so the
//! constraint reads `||E_A[b (Y - b'beta)]||_inf <= lambda` and
//! `||E_A m(X, b) - G rho||_inf <= lambda` respectively.

mod first_order;
pub mod simplex;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::dictionary::Dictionary;
use crate::error::{check_finite, check_len, Error, Result};
use crate::functional::{column_means, Functional};

pub use simplex::PivotRule;

/// Problems larger than this go to the first-order backend under `Backend::Auto`.
pub const AUTO_FIRST_ORDER_ABOVE: usize = 2000;

#[derive(Clone, Debug)]
pub struct RmdProblem {
    g_hat: DMatrix<f64>,
    m_hat: DVector<f64>,
    lambda: f64,
    l1_bound: f64,
}

impl RmdProblem {
    /// `g_hat` must be symmetric up to `1e-10 (1 + max |G|)`; it is symmetrized.
    /// `l1_bound = f64::INFINITY` drops the `||t||_1 <= B` constraint.
    pub fn new(g_hat: DMatrix<f64>, m_hat: DVector<f64>, lambda: f64, l1_bound: f64) -> Result<Self> {
        let p = m_hat.len();
        if p == 0 {
            return Err(Error::InvalidArgument("empty moment vector".into()));
        }
        check_len("G rows", p, g_hat.nrows())?;
        check_len("G columns", p, g_hat.ncols())?;
        check_finite("G", g_hat.as_slice())?;
        check_finite("M", m_hat.as_slice())?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if l1_bound.is_nan() || l1_bound <= 0.0 {
            return Err(Error::InvalidArgument(format!("l1 bound must be positive, got {l1_bound}")));
        }
        let asym = (&g_hat - g_hat.transpose()).amax();
        if asym > 1e-10 * (1.0 + g_hat.amax()) {
            return Err(Error::InvalidArgument(format!("G is not symmetric (max asymmetry {asym:e})")));
        }
        let g_hat = (&g_hat + g_hat.transpose()) * 0.5;
        Ok(RmdProblem {
            g_hat,
            m_hat,
            lambda,
            l1_bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_hat.len()
    }

    pub fn g_hat(&self) -> &DMatrix<f64> {
        &self.g_hat
    }

    pub fn m_hat(&self) -> &DVector<f64> {
        &self.m_hat
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn l1_bound(&self) -> f64 {
        self.l1_bound
    }

    /// `||G t - M||_inf`, by a direct product.
    pub fn max_residual(&self, t: &DVector<f64>) -> f64 {
        (&self.g_hat * t - &self.m_hat).amax()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::IterationLimit => "iteration_limit",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Simplex up to `AUTO_FIRST_ORDER_ABOVE` coefficients, first-order above.
    Auto,
    Simplex,
    /// Linearized ADMM with a duality-gap stopping rule.
    FirstOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub backend: Backend,
    pub max_iters: usize,
    /// Allowed excess of `||G t - M||_inf` over lambda, relative to `1 + ||M||_inf`.
    pub feas_tol: f64,
    pub opt_tol_abs: f64,
    pub opt_tol_rel: f64,
    pub pivot_rule: PivotRuleName,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRuleName {
    Dantzig,
    Bland,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: Backend::Auto,
            max_iters: 100_000,
            feas_tol: 1e-9,
            opt_tol_abs: 1e-8,
            opt_tol_rel: 1e-6,
            pivot_rule: PivotRuleName::Dantzig,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmdSolution {
    pub t_hat: Vec<f64>,
    pub l1_norm: f64,
    pub max_residual: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub lambda: f64,
    /// `None` when the l1 bound is infinite.
    pub l1_bound: Option<f64>,
}

impl RmdSolution {
    pub fn coef(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.t_hat)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}

/// Solves the RMD linear program.
///
/// Feasibility is re-checked outside the backend; an `Optimal` status from the
/// backend whose solution fails that check is retried once with Bland's rule
/// and otherwise reported as `IterationLimit` with the incumbent attached.
pub fn solve_rmd(prob: &RmdProblem, opts: &SolverOptions) -> RmdSolution {
    let use_first_order = match opts.backend {
        Backend::Auto => prob.dim() > AUTO_FIRST_ORDER_ABOVE,
        Backend::Simplex => false,
        Backend::FirstOrder => true,
    };
    let (t, mut status, iterations) = if use_first_order {
        first_order::solve(prob, opts)
    } else {
        let rule = match opts.pivot_rule {
            PivotRuleName::Dantzig => PivotRule::Dantzig,
            PivotRuleName::Bland => PivotRule::Bland,
        };
        let (t, status, iters) = solve_simplex(prob, opts, rule);
        if status == SolverStatus::Optimal && !feasible(prob, &t, opts) && rule != PivotRule::Bland {
            solve_simplex(prob, opts, PivotRule::Bland)
        } else {
            (t, status, iters)
        }
    };
    if status == SolverStatus::Optimal && !feasible(prob, &t, opts) {
        status = SolverStatus::IterationLimit;
    }
    RmdSolution {
        l1_norm: t.iter().map(|v| v.abs()).sum(),
        max_residual: prob.max_residual(&t),
        t_hat: t.as_slice().to_vec(),
        status,
        iterations,
        lambda: prob.lambda,
        l1_bound: prob.l1_bound.is_finite().then_some(prob.l1_bound),
    }
}

fn feasible(prob: &RmdProblem, t: &DVector<f64>, opts: &SolverOptions) -> bool {
    let tol = opts.feas_tol * (1.0 + prob.m_hat.amax());
    prob.max_residual(t) <= prob.lambda + tol && t.lp_norm(1) <= prob.l1_bound + tol
}

// Variables (u, v) >= 0 with t = u - v:
//   G u - G v <= M + lambda,  -G u + G v <= lambda - M,  1'u + 1'v <= B.
fn solve_simplex(prob: &RmdProblem, opts: &SolverOptions, rule: PivotRule) -> (DVector<f64>, SolverStatus, usize) {
    let p = prob.dim();
    let bounded = prob.l1_bound.is_finite();
    let rows = 2 * p + usize::from(bounded);
    let mut a = DMatrix::zeros(rows, 2 * p);
    let mut b = vec![0.0; rows];
    for i in 0..p {
        for j in 0..p {
            let g = prob.g_hat[(i, j)];
            a[(i, j)] = g;
            a[(i, p + j)] = -g;
            a[(p + i, j)] = -g;
            a[(p + i, p + j)] = g;
        }
        b[i] = prob.m_hat[i] + prob.lambda;
        b[p + i] = prob.lambda - prob.m_hat[i];
    }
    if bounded {
        for j in 0..2 * p {
            a[(2 * p, j)] = 1.0;
        }
        b[2 * p] = prob.l1_bound;
    }
    let lp_opts = simplex::LpOptions {
        max_iters: opts.max_iters,
        pivot_rule: rule,
        ..simplex::LpOptions::default()
    };
    let res = simplex::solve(&vec![1.0; 2 * p], &a, &b, &lp_opts);
    let t = DVector::from_iterator(p, (0..p).map(|j| res.x[j] - res.x[p + j]));
    let status = match res.status {
        simplex::LpStatus::Optimal => SolverStatus::Optimal,
        simplex::LpStatus::Infeasible => SolverStatus::Infeasible,
        // the objective is bounded below by zero, so this only signals numerical trouble
        simplex::LpStatus::Unbounded | simplex::LpStatus::IterationLimit => SolverStatus::IterationLimit,
    };
    (t, status, res.iterations)
}

/// How the regularization level is chosen for a fit on `|A|` rows with `p` moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    Fixed { value: f64 },
    /// `lambda = c * Phi^{-1}(1 - alpha / (2 p)) / sqrt(|A|)`.
    GaussianQuantile {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_c() -> f64 {
    1.1
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::GaussianQuantile {
            c: default_c(),
            alpha: default_alpha(),
        }
    }
}

impl LambdaRule {
    pub fn lambda(&self, p: usize, n_rows: usize) -> Result<f64> {
        let value = match *self {
            LambdaRule::Fixed { value } => value,
            LambdaRule::GaussianQuantile { c, alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) || !(c >= 0.0) || p == 0 || n_rows == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "gaussian_quantile rule needs c >= 0, alpha in (0, 1), p, n > 0 \
                         (got c = {c}, alpha = {alpha}, p = {p}, n = {n_rows})"
                    )));
                }
                let z = Normal::standard().inverse_cdf(1.0 - alpha / (2.0 * p as f64));
                c * z / (n_rows as f64).sqrt()
            }
        };
        if value.is_finite() && value >= 0.0 {
            Ok(value)
        } else {
            Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {value}")))
        }
    }

    /// The same rule with its level multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            LambdaRule::Fixed { value } => LambdaRule::Fixed { value: value * factor },
            LambdaRule::GaussianQuantile { c, alpha } => LambdaRule::GaussianQuantile { c: c * factor, alpha },
        }
    }
}

/// `E_A b b'` from the design rows `b(X_i)'`.
pub(crate) fn gram(design: &DMatrix<f64>) -> DMatrix<f64> {
    design.tr_mul(design) / design.nrows() as f64
}

// `g_hat` is `gram(design)`, passed in so both fits on one sample share it.
pub(crate) fn blp_problem(design: &DMatrix<f64>, g_hat: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, l1_bound: f64) -> Result<RmdProblem> {
    let m_hat = design.tr_mul(y) / design.nrows() as f64;
    RmdProblem::new(g_hat.clone(), m_hat, lambda, l1_bound)
}

pub(crate) fn riesz_problem(g_hat: &DMatrix<f64>, m_rows: &DMatrix<f64>, lambda: f64, l1_bound: f64) -> Result<RmdProblem> {
    RmdProblem::new(g_hat.clone(), column_means(m_rows), lambda, l1_bound)
}

/// Sparse best linear predictor on `rows`: `G = E_A b b'`, `M = E_A Y b`.
pub fn estimate_blp(
    data: &Dataset,
    rows: &[usize],
    dict: &Dictionary,
    rule: &LambdaRule,
    l1_bound: f64,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, RmdSolution)> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("BLP fit needs at least 2 rows".into()));
    }
    let design = dict.design_matrix(data, rows)?;
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| data.y(i)));
    let lambda = rule.lambda(dict.output_dim(), rows.len())?;
    let sol = solve_rmd(&blp_problem(&design, &gram(&design), &y, lambda, l1_bound)?, opts);
    Ok((sol.coef(), sol))
}

/// Sparse Riesz representer on `rows`: `G = E_A b b'`, `M = E_A m(X, b)`.
pub fn estimate_riesz(
    data: &Dataset,
    rows: &[usize],
    dict: &Dictionary,
    functional: &Functional,
    rule: &LambdaRule,
    l1_bound: f64,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, RmdSolution)> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("Riesz fit needs at least 2 rows".into()));
    }
    let design = dict.design_matrix(data, rows)?;
    let m_rows = functional.m_matrix(dict, data, rows)?;
    let lambda = rule.lambda(dict.output_dim(), rows.len())?;
    let sol = solve_rmd(&riesz_problem(&gram(&design), &m_rows, lambda, l1_bound)?, opts);
    Ok((sol.coef(), sol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(g: DMatrix<f64>, m: Vec<f64>, lambda: f64, b: f64) -> RmdSolution {
        let prob = RmdProblem::new(g, DVector::from_vec(m), lambda, b).unwrap();
        solve_rmd(&prob, &SolverOptions::default())
    }

    #[test]
    fn identity_soft_thresholds() {
        let sol = solve(DMatrix::identity(3, 3), vec![0.9, 0.1, 0.0], 0.2, f64::INFINITY);
        assert_eq!(sol.status, SolverStatus::Optimal);
        let expect = [0.7, 0.0, 0.0];
        for (a, b) in sol.t_hat.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", sol.t_hat);
        }
    }

    #[test]
    fn large_lambda_gives_zero() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let sol = solve(g, vec![0.5, -0.7], 0.7, f64::INFINITY);
        assert!(sol.is_optimal());
        assert!(sol.t_hat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exact_system_when_lambda_zero() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let sol = solve(g, vec![1.0, 1.0], 0.0, f64::INFINITY);
        assert!(sol.is_optimal());
        for v in &sol.t_hat {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tight_l1_bound_is_infeasible() {
        let sol = solve(DMatrix::identity(2, 2), vec![1.0, -1.0], 0.1, 1.0);
        assert_eq!(sol.status, SolverStatus::Infeasible);
        let ok = solve(DMatrix::identity(2, 2), vec![1.0, -1.0], 0.1, 1.8);
        assert!(ok.is_optimal());
        assert!((ok.l1_norm - 1.8).abs() < 1e-12);
    }

    #[test]
    fn duplicated_columns_are_fine() {
        // b = (x, x): G is singular
        let g = DMatrix::from_element(2, 2, 1.0);
        let sol = solve(g, vec![1.0, 1.0], 0.1, f64::INFINITY);
        assert!(sol.is_optimal());
        assert!((sol.l1_norm - 0.9).abs() < 1e-12);
    }

    #[test]
    fn problem_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(RmdProblem::new(bad, DVector::zeros(2), 0.1, f64::INFINITY).is_err());
        assert!(RmdProblem::new(DMatrix::identity(2, 2), DVector::zeros(2), -0.1, f64::INFINITY).is_err());
        assert!(RmdProblem::new(DMatrix::identity(2, 2), DVector::zeros(3), 0.1, f64::INFINITY).is_err());
        assert!(RmdProblem::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.1, 0.0).is_err());
        let nan = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(RmdProblem::new(DMatrix::identity(2, 2), nan, 0.1, f64::INFINITY).is_err());
    }

    #[test]
    fn gaussian_quantile_rule() {
        let rule = LambdaRule::GaussianQuantile { c: 1.0, alpha: 0.05 };
        // p = 1: Phi^{-1}(0.975) / sqrt(100)
        let l = rule.lambda(1, 100).unwrap();
        assert!((l - 0.195_996_398_454_005_4).abs() < 1e-9);
        assert!(LambdaRule::Fixed { value: -1.0 }.lambda(3, 10).is_err());
        assert!(LambdaRule::GaussianQuantile { c: 1.0, alpha: 1.5 }.lambda(3, 10).is_err());
    }

    #[test]
    fn first_order_matches_simplex_small() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.4, 0.1, 0.4, 1.5, -0.3, 0.1, -0.3, 1.0]);
        let m = DVector::from_vec(vec![1.0, -0.8, 0.3]);
        let prob = RmdProblem::new(g, m, 0.15, f64::INFINITY).unwrap();
        let exact = solve_rmd(&prob, &SolverOptions::default());
        let fo = solve_rmd(
            &prob,
            &SolverOptions {
                backend: Backend::FirstOrder,
                max_iters: 200_000,
                ..SolverOptions::default()
            },
        );
        assert!(exact.is_optimal());
        assert_eq!(fo.status, SolverStatus::Optimal, "{fo:?}");
        assert!((exact.l1_norm - fo.l1_norm).abs() <= 1e-8 + 1e-6 * exact.l1_norm);
    }
}
