//! Debiased machine learning for linear functionals of regression functions.
//!
//! The regression function and the Riesz representer of the functional are both
//! approximated by sparse linear combinations of a basis dictionary, each fitted
//! by an l1-minimal solution of sample moment equations under a sup-norm
//! tolerance (a Dantzig-selector type linear program). The two fits are combined
//! in a cross-fitted, doubly robust score that yields a point estimate with a
//! Gaussian confidence interval.
//!
//! Modules, bottom-up:
//!
//! * [`dictionary`] and [`dataset`]: basis functions and data.
//! * [`functional`]: average derivatives, policy shifts, treatment effects.
//! * [`rmd`]: the l1 program, its simplex and first-order solvers, and the two fits.
//! * [`dml`]: fold plans, the score, and the cross-fitted estimator.
//! * [`simulation`]: designs with known truth and the Monte Carlo harness.
//! * [`cli`]: configuration files and the `riesz-dml` command.

pub mod cli;
pub mod dataset;
pub mod dictionary;
pub mod dml;
mod error;
pub mod functional;
pub mod json;
pub mod rmd;
pub mod simulation;

pub use dataset::Dataset;
pub use dictionary::{Dictionary, DictionaryKind};
pub use dml::{dml_estimate, dml_estimate_with_plan, DmlOptions, DmlResult, FoldPlan};
pub use error::{Error, Result};
pub use functional::Functional;
pub use rmd::{estimate_blp, estimate_riesz, solve_rmd, LambdaRule, RmdProblem, RmdSolution, SolverOptions, SolverStatus};
