//! Designs with known truth and the Monte Carlo harness.

mod dgp;
mod monte_carlo;
mod truth;

pub use dgp::{Dgp, XDist, PROPENSITY_MIN};
pub use monte_carlo::{replication_seeds, run_monte_carlo, write_records_csv, Experiment, MonteCarloReport, ReplicationRecord};
pub use truth::{true_riesz, true_theta, true_theta_monte_carlo, TrueTheta, TruthMethod, TRUTH_DRAWS};
