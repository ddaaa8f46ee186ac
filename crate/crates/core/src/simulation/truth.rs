use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::dgp::{Dgp, XDist};
use crate::dictionary::Dictionary;
use crate::error::{check_len, Error, Result};
use crate::functional::Functional;

/// Draws used by the Monte Carlo fallback of [`true_theta`].
pub const TRUTH_DRAWS: usize = 10_000_000;
const TRUTH_SEED: u64 = 0x7275_7468;
const CHUNK: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrueTheta {
    pub value: f64,
    /// Standard error of the oracle; zero for analytic values.
    pub std_error: f64,
    pub method: TruthMethod,
}

/// `theta* = E m(X, gamma*)`, analytic where the design allows it and otherwise a
/// Monte Carlo average over [`TRUTH_DRAWS`] draws.
pub fn true_theta(dgp: &Dgp, f: &Functional) -> Result<TrueTheta> {
    dgp.validate()?;
    let (dict, beta) = dgp.regression_model()?;
    f.check_compatible(&dict)?;
    match analytic_theta(dgp, f, &dict, &beta) {
        Some(value) => Ok(TrueTheta {
            value,
            std_error: 0.0,
            method: TruthMethod::Analytic,
        }),
        None => true_theta_monte_carlo(dgp, f, TRUTH_DRAWS, TRUTH_SEED),
    }
}

/// Monte Carlo oracle for `E m(X, gamma*)`, reproducible in `seed`.
pub fn true_theta_monte_carlo(dgp: &Dgp, f: &Functional, draws: usize, seed: u64) -> Result<TrueTheta> {
    let (dict, beta) = dgp.regression_model()?;
    f.check_compatible(&dict)?;
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let chunks = draws.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let len = CHUNK.min(draws - c * CHUNK).max(2);
            let data = dgp.generate(len, seed.wrapping_add(c as u64))?;
            let p = dict.output_dim();
            let (mut m, mut scratch) = (vec![0.0; p], vec![0.0; p]);
            let (mut sum, mut sq) = (0.0, 0.0);
            for i in 0..len {
                f.m_into(&dict, data.row(i), &mut m, &mut scratch);
                let v: f64 = m.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
                sum += v;
                sq += v * v;
            }
            Ok((sum, sq))
        })
        .collect::<Result<_>>()?;
    let total = (0..chunks).map(|c| CHUNK.min(draws - c * CHUNK).max(2)).sum::<usize>() as f64;
    let (sum, sq) = partial.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let mean = sum / total;
    let var = ((sq - total * mean * mean) / (total - 1.0)).max(0.0);
    Ok(TrueTheta {
        value: mean,
        std_error: (var / total).sqrt(),
        method: TruthMethod::MonteCarlo,
    })
}

fn diagonal_transport(f: &Functional) -> Option<(Vec<f64>, Vec<f64>)> {
    let Functional::PolicyShift {
        transport_s,
        transport_c,
    } = f
    else {
        return None;
    };
    let d = transport_c.len();
    for r in 0..d {
        for c in 0..d {
            if r != c && transport_s[r * d + c] != 0.0 {
                return None;
            }
        }
    }
    Some(((0..d).map(|k| transport_s[k * d + k]).collect(), transport_c.clone()))
}

// E (s X + c)^e for one coordinate.
fn affine_moment(dist: XDist, s: f64, c: f64, e: u32) -> f64 {
    let mut binom = 1.0;
    let mut total = 0.0;
    for i in 0..=e {
        total += binom * s.powi(i as i32) * c.powi((e - i) as i32) * dist.moment(i);
        binom = binom * f64::from(e - i) / f64::from(i + 1);
    }
    total
}

// E b_j(s X + c) for every basis element, coordinates independent with law `dist`.
fn basis_means(dict: &Dictionary, dist: XDist, s: &[f64], c: &[f64]) -> Option<Vec<f64>> {
    if let Some(exps) = dict.monomial_exponents() {
        return Some(
            exps.iter()
                .map(|e| e.iter().enumerate().map(|(k, &ek)| affine_moment(dist, s[k], c[k], ek)).product())
                .collect(),
        );
    }
    if let Some(pairs) = dict.fourier_pairs() {
        let mut out = vec![1.0];
        for &(k, o) in pairs {
            // cos(w (sX + c)) and sin(w (sX + c)) with E sin(w s X) = 0
            let w = std::f64::consts::PI * f64::from(o);
            let phi = dist.char_fn(w * s[k]);
            out.push((w * c[k]).cos() * phi);
            out.push((w * c[k]).sin() * phi);
        }
        return Some(out);
    }
    if dict.treatment_index().is_none() && dict.output_dim() == dict.input_dim() {
        // identity: E(s_k X_k + c_k) = c_k
        return Some(c.to_vec());
    }
    None
}

// E d b_j / d x_k for every basis element.
fn gradient_means(dict: &Dictionary, dist: XDist, k: usize) -> Option<Vec<f64>> {
    if let Some(exps) = dict.monomial_exponents() {
        return Some(
            exps.iter()
                .map(|e| {
                    if e[k] == 0 {
                        return 0.0;
                    }
                    e.iter()
                        .enumerate()
                        .map(|(l, &el)| if l == k { f64::from(el) * dist.moment(el - 1) } else { dist.moment(el) })
                        .product()
                })
                .collect(),
        );
    }
    if let Some(pairs) = dict.fourier_pairs() {
        let mut out = vec![0.0];
        for &(l, o) in pairs {
            let w = std::f64::consts::PI * f64::from(o);
            out.push(0.0);
            out.push(if l == k { w * dist.char_fn(w) } else { 0.0 });
        }
        return Some(out);
    }
    if dict.treatment_index().is_none() && dict.output_dim() == dict.input_dim() {
        return Some((0..dict.output_dim()).map(|j| f64::from(u8::from(j == k))).collect());
    }
    None
}

fn analytic_theta(dgp: &Dgp, f: &Functional, dict: &Dictionary, beta: &DVector<f64>) -> Option<f64> {
    if let Dgp::AteLogistic { tau, outcome_coefs, .. } = dgp {
        // gamma(d, z) = tau d + z'c
        return match f {
            Functional::AverageTreatmentEffect { .. } => Some(*tau),
            Functional::AverageDerivative { direction } => {
                Some(direction[1..].iter().zip(outcome_coefs).map(|(a, c)| a * c).sum())
            }
            Functional::PolicyShift {
                transport_s,
                transport_c,
            } => {
                // E[(S x + c)_z - z] = S_{z,d} E[D] + c_z; E[D] has no closed form
                let d = transport_c.len();
                if (1..d).any(|r| transport_s[r * d] != 0.0) {
                    return None;
                }
                Some(transport_c[1..].iter().zip(outcome_coefs).map(|(a, c)| a * c).sum())
            }
        };
    }
    let dist = dgp.x_dist()?;
    let d = dict.input_dim();
    let means = match f {
        Functional::AverageDerivative { direction } => {
            let mut acc = vec![0.0; dict.output_dim()];
            for (k, a) in direction.iter().enumerate().filter(|(_, a)| **a != 0.0) {
                for (slot, g) in acc.iter_mut().zip(gradient_means(dict, dist, k)?) {
                    *slot += a * g;
                }
            }
            acc
        }
        Functional::PolicyShift { .. } => {
            let (s, c) = diagonal_transport(f)?;
            let moved = basis_means(dict, dist, &s, &c)?;
            let base = basis_means(dict, dist, &vec![1.0; d], &vec![0.0; d])?;
            moved.iter().zip(&base).map(|(a, b)| a - b).collect()
        }
        Functional::AverageTreatmentEffect { .. } => return None,
    };
    Some(means.iter().zip(beta.iter()).map(|(a, b)| a * b).sum())
}

fn is_identity_transport(f: &Functional) -> bool {
    match f {
        Functional::PolicyShift {
            transport_s,
            transport_c,
        } => {
            let d = transport_c.len();
            transport_c.iter().all(|c| *c == 0.0)
                && (0..d * d).all(|i| transport_s[i] == if i / d == i % d { 1.0 } else { 0.0 })
        }
        _ => false,
    }
}

/// The Riesz representer `alpha*(x)` of `f` under the design's covariate law.
///
/// Closed forms: inverse propensity weights for the treatment design, `a'x` for an
/// average derivative under standard normal covariates, the density ratio
/// `f_{SX+c}(x) / f_X(x) - 1` for a policy shift under standard normal covariates,
/// and zero for the identity transport.
pub fn true_riesz(dgp: &Dgp, f: &Functional, x: &[f64]) -> Result<f64> {
    check_len("covariates", dgp.dim(), x.len())?;
    let (dict, _) = dgp.regression_model()?;
    f.check_compatible(&dict)?;
    if is_identity_transport(f) {
        return Ok(0.0);
    }
    let none = || Error::NoClosedForm(format!("no closed-form representer for {f:?} under this design"));
    if let (Dgp::AteLogistic { .. }, Functional::AverageTreatmentEffect { .. }) = (dgp, f) {
        let pi = dgp.propensity(&x[1..]).expect("treatment design");
        return Ok(if x[0] == 1.0 { 1.0 / pi } else { -1.0 / (1.0 - pi) });
    }
    if dgp.x_dist() != Some(XDist::Normal) {
        return Err(none());
    }
    match f {
        Functional::AverageDerivative { direction } => Ok(direction.iter().zip(x).map(|(a, v)| a * v).sum()),
        Functional::PolicyShift {
            transport_s,
            transport_c,
        } => {
            // SX + c ~ N(c, S S')
            let d = x.len();
            let s = DMatrix::from_row_slice(d, d, transport_s);
            let det = s.determinant();
            let inv = s.try_inverse().filter(|_| det != 0.0).ok_or_else(none)?;
            let xv = DVector::from_column_slice(x);
            let u = inv * (&xv - DVector::from_column_slice(transport_c));
            let log_ratio = -0.5 * u.norm_squared() + 0.5 * xv.norm_squared() - det.abs().ln();
            Ok(log_ratio.exp() - 1.0)
        }
        Functional::AverageTreatmentEffect { .. } => Err(none()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::DictionaryKind;

    fn linear(x_dist: XDist) -> Dgp {
        Dgp::SparseLinear {
            dim: 3,
            dictionary: DictionaryKind::Identity,
            beta_star: vec![1.0, 0.5],
            x_dist,
            noise_sd: 1.0,
        }
    }

    #[test]
    fn derivative_of_linear_design() {
        let f = Functional::average_derivative(vec![1.0, 0.0, 0.0]).unwrap();
        let t = true_theta(&linear(XDist::Normal), &f).unwrap();
        assert_eq!(t.method, TruthMethod::Analytic);
        assert!((t.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ate_truth_is_tau() {
        let dgp = Dgp::AteLogistic {
            d_z: 2,
            outcome_coefs: vec![1.0, -1.0],
            tau: 0.7,
            propensity_coefs: vec![0.3, 0.0],
            noise_sd: 1.0,
        };
        assert_eq!(true_theta(&dgp, &Functional::ate(0)).unwrap().value, 0.7);
        let pi = dgp.propensity(&[0.4, 2.0]).unwrap();
        assert_eq!(true_riesz(&dgp, &Functional::ate(0), &[1.0, 0.4, 2.0]).unwrap(), 1.0 / pi);
        assert_eq!(true_riesz(&dgp, &Functional::ate(0), &[0.0, 0.4, 2.0]).unwrap(), -1.0 / (1.0 - pi));
    }

    #[test]
    fn quadratic_shift_matches_monte_carlo() {
        // gamma = x1 + x1^2: E[gamma(X + c) - gamma(X)] = c + c^2 under N(0, 1)
        let dgp = Dgp::SparseLinear {
            dim: 2,
            dictionary: DictionaryKind::Polynomial {
                degree: 2,
                interactions: false,
            },
            beta_star: vec![0.0, 1.0, 0.0, 1.0],
            x_dist: XDist::Normal,
            noise_sd: 1.0,
        };
        let f = Functional::location_shift(vec![0.1, 0.0]).unwrap();
        let t = true_theta(&dgp, &f).unwrap();
        assert!((t.value - 0.11).abs() < 1e-14);
        let mc = true_theta_monte_carlo(&dgp, &f, 200_000, 5).unwrap();
        assert!((mc.value - 0.11).abs() < 4.0 * mc.std_error);
    }

    #[test]
    fn non_diagonal_transport_falls_back() {
        let dgp = Dgp::SparseLinear {
            dim: 2,
            dictionary: DictionaryKind::Polynomial {
                degree: 2,
                interactions: true,
            },
            beta_star: vec![0.0, 0.0, 0.0, 0.0, 1.0],
            x_dist: XDist::Uniform,
            noise_sd: 1.0,
        };
        let f = Functional::policy_shift(vec![1.0, 0.5, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let (dict, beta) = dgp.regression_model().unwrap();
        assert!(analytic_theta(&dgp, &f, &dict, &beta).is_none());
        // gamma = x1 x2: E[(x1 + 0.5 x2) x2 - x1 x2] = 0.5 E x2^2 = 1/6
        let mc = true_theta_monte_carlo(&dgp, &f, 200_000, 1).unwrap();
        assert_eq!(mc.method, TruthMethod::MonteCarlo);
        assert!((mc.value - 1.0 / 6.0).abs() < 4.0 * mc.std_error);
    }

    #[test]
    fn riesz_closed_forms() {
        let f = Functional::average_derivative(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(true_riesz(&linear(XDist::Normal), &f, &[0.3, 1.0, 2.0]).unwrap(), 0.3);
        assert!(matches!(
            true_riesz(&linear(XDist::Uniform), &f, &[0.3, 1.0, 2.0]),
            Err(Error::NoClosedForm(_))
        ));
        let id = Functional::location_shift(vec![0.0; 3]).unwrap();
        assert_eq!(true_riesz(&linear(XDist::Uniform), &id, &[0.3, 1.0, 2.0]).unwrap(), 0.0);
        // N(c, 1) / N(0, 1) density ratio in one coordinate
        let shift = Functional::location_shift(vec![0.5, 0.0, 0.0]).unwrap();
        let a = true_riesz(&linear(XDist::Normal), &shift, &[1.0, 0.0, 0.0]).unwrap();
        assert!((a - ((0.5f64 * 1.0 - 0.125).exp() - 1.0)).abs() < 1e-14);
    }
}
