use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dictionary::{Dictionary, DictionaryKind};
use crate::error::{check_finite, Error, Result};

/// Propensity scores are clipped to `[PROPENSITY_MIN, 1 - PROPENSITY_MIN]`.
pub const PROPENSITY_MIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XDist {
    /// Independent standard normal coordinates.
    Normal,
    /// Independent uniform coordinates on `[-1, 1]`.
    Uniform,
}

impl XDist {
    /// `E X^k` for one coordinate.
    pub fn moment(self, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        match self {
            XDist::Normal => (1..k).step_by(2).map(f64::from).product(),
            XDist::Uniform => 1.0 / f64::from(k + 1),
        }
    }

    /// Characteristic function `E cos(t X)` for one coordinate (`E sin(t X) = 0`).
    pub fn char_fn(self, t: f64) -> f64 {
        match self {
            XDist::Normal => (-0.5 * t * t).exp(),
            XDist::Uniform if t == 0.0 => 1.0,
            XDist::Uniform => t.sin() / t,
        }
    }

    fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            XDist::Normal => rng.sample(StandardNormal),
            XDist::Uniform => Uniform::new_inclusive(-1.0, 1.0).expect("valid range").sample(rng),
        }
    }
}

fn identity_kind() -> DictionaryKind {
    DictionaryKind::Identity
}

/// Data-generating processes with known regression function `gamma(x) = E[Y | X = x]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dgp {
    /// `Y = b(X)'beta* + noise`. `beta_star` may be shorter than the dictionary;
    /// missing coefficients are zero.
    SparseLinear {
        dim: usize,
        #[serde(default = "identity_kind")]
        dictionary: DictionaryKind,
        beta_star: Vec<f64>,
        x_dist: XDist,
        noise_sd: f64,
    },
    /// `Z ~ N(0, I)`, `D ~ Bernoulli(pi(Z))` with `pi` the logistic of
    /// `Z'propensity_coefs` clipped to `[0.05, 0.95]`, and
    /// `Y = tau D + Z'outcome_coefs + noise`. Covariates are `(D, Z)`. Coefficient
    /// vectors shorter than `d_z` are padded with zeros.
    AteLogistic {
        d_z: usize,
        outcome_coefs: Vec<f64>,
        tau: f64,
        propensity_coefs: Vec<f64>,
        noise_sd: f64,
    },
    /// `X ~ N(0, I_dim)`, `Y = X'beta + noise` with `beta_j = j^(-decay_rate)`.
    DenseDecay {
        dim: usize,
        decay_rate: f64,
        noise_sd: f64,
    },
}

impl Dgp {
    pub fn validate(&self) -> Result<()> {
        let noise_sd = match self {
            Dgp::SparseLinear { noise_sd, .. } | Dgp::AteLogistic { noise_sd, .. } | Dgp::DenseDecay { noise_sd, .. } => *noise_sd,
        };
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise_sd must be finite and >= 0, got {noise_sd}")));
        }
        match self {
            Dgp::SparseLinear { beta_star, .. } => {
                check_finite("beta_star", beta_star)?;
                self.regression_model().map(|_| ())
            }
            Dgp::AteLogistic {
                d_z,
                outcome_coefs,
                tau,
                propensity_coefs,
                ..
            } => {
                if *d_z == 0 {
                    return Err(Error::InvalidArgument("d_z must be positive".into()));
                }
                for (name, coefs) in [("outcome_coefs", outcome_coefs), ("propensity_coefs", propensity_coefs)] {
                    if coefs.len() > *d_z {
                        return Err(Error::InvalidArgument(format!("{name} has {} entries but d_z = {d_z}", coefs.len())));
                    }
                }
                check_finite("outcome_coefs", outcome_coefs)?;
                check_finite("propensity_coefs", propensity_coefs)?;
                check_finite("tau", &[*tau])
            }
            Dgp::DenseDecay { dim, decay_rate, .. } => {
                if *dim == 0 || !decay_rate.is_finite() || *decay_rate < 0.0 {
                    return Err(Error::InvalidArgument("dense_decay needs dim > 0 and decay_rate >= 0".into()));
                }
                Ok(())
            }
        }
    }

    /// Number of covariates.
    pub fn dim(&self) -> usize {
        match self {
            Dgp::SparseLinear { dim, .. } | Dgp::DenseDecay { dim, .. } => *dim,
            Dgp::AteLogistic { d_z, .. } => d_z + 1,
        }
    }

    pub fn treatment_col(&self) -> Option<usize> {
        matches!(self, Dgp::AteLogistic { .. }).then_some(0)
    }

    pub fn noise_sd(&self) -> f64 {
        match self {
            Dgp::SparseLinear { noise_sd, .. } | Dgp::AteLogistic { noise_sd, .. } | Dgp::DenseDecay { noise_sd, .. } => *noise_sd,
        }
    }

    /// Covariate law when coordinates are independent draws from one marginal.
    pub fn x_dist(&self) -> Option<XDist> {
        match self {
            Dgp::SparseLinear { x_dist, .. } => Some(*x_dist),
            Dgp::DenseDecay { .. } => Some(XDist::Normal),
            Dgp::AteLogistic { .. } => None,
        }
    }

    /// The regression function as `b(x)'beta` on a generating dictionary.
    pub fn regression_model(&self) -> Result<(Dictionary, DVector<f64>)> {
        match self {
            Dgp::SparseLinear {
                dim,
                dictionary,
                beta_star,
                ..
            } => {
                let dict = Dictionary::new(dictionary.clone(), *dim)?;
                if beta_star.len() > dict.output_dim() {
                    return Err(Error::InvalidArgument(format!(
                        "beta_star has {} entries but the dictionary has {}",
                        beta_star.len(),
                        dict.output_dim()
                    )));
                }
                let mut beta = DVector::zeros(dict.output_dim());
                beta.as_mut_slice()[..beta_star.len()].copy_from_slice(beta_star);
                Ok((dict, beta))
            }
            Dgp::AteLogistic {
                d_z,
                outcome_coefs,
                tau,
                ..
            } => {
                if outcome_coefs.len() > *d_z {
                    return Err(Error::InvalidArgument(format!("outcome_coefs has {} entries but d_z = {d_z}", outcome_coefs.len())));
                }
                // (1, z, d, d z) with coefficients (0, c, tau, 0)
                let dict = Dictionary::treatment_interacted(
                    DictionaryKind::Polynomial {
                        degree: 1,
                        interactions: false,
                    },
                    d_z + 1,
                    0,
                )?;
                let mut beta = DVector::zeros(dict.output_dim());
                beta.as_mut_slice()[1..=outcome_coefs.len()].copy_from_slice(outcome_coefs);
                beta[d_z + 1] = *tau;
                Ok((dict, beta))
            }
            Dgp::DenseDecay { dim, decay_rate, .. } => {
                let beta = DVector::from_iterator(*dim, (1..=*dim).map(|j| (j as f64).powf(-decay_rate)));
                Ok((Dictionary::identity(*dim)?, beta))
            }
        }
    }

    /// `P(D = 1 | Z = z)` for the treatment design.
    pub fn propensity(&self, z: &[f64]) -> Option<f64> {
        match self {
            Dgp::AteLogistic { propensity_coefs, .. } => {
                let index: f64 = z.iter().zip(propensity_coefs).map(|(a, b)| a * b).sum();
                let pi = 1.0 / (1.0 + (-index).exp());
                Some(pi.clamp(PROPENSITY_MIN, 1.0 - PROPENSITY_MIN))
            }
            _ => None,
        }
    }

    /// Draws `n` i.i.d. observations; identical `(self, n, seed)` give identical data.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.validate()?;
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
        }
        let (dict, beta) = self.regression_model()?;
        let d = self.dim();
        let noise_sd = self.noise_sd();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n * d);
        let mut ys = Vec::with_capacity(n);
        let mut b = vec![0.0; dict.output_dim()];
        let mut x = vec![0.0; d];
        for _ in 0..n {
            match self {
                Dgp::AteLogistic { .. } => {
                    for v in x[1..].iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    let pi = self.propensity(&x[1..]).expect("treatment design");
                    let treated = Bernoulli::new(pi).expect("pi in (0, 1)").sample(&mut rng);
                    x[0] = if treated { 1.0 } else { 0.0 };
                }
                _ => {
                    let dist = self.x_dist().expect("independent design");
                    for v in x.iter_mut() {
                        *v = dist.sample(&mut rng);
                    }
                }
            }
            dict.evaluate_into(&x, &mut b);
            let mean: f64 = b.iter().zip(beta.iter()).map(|(a, c)| a * c).sum();
            let eps: f64 = rng.sample(StandardNormal);
            ys.push(mean + noise_sd * eps);
            xs.extend_from_slice(&x);
        }
        let names = match self {
            Dgp::AteLogistic { .. } => std::iter::once("d".to_string())
                .chain((1..d).map(|k| format!("z{k}")))
                .collect(),
            _ => (1..=d).map(|k| format!("x{k}")).collect(),
        };
        Dataset::new(ys, xs, d, self.treatment_col())?.with_names(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse(noise_sd: f64) -> Dgp {
        Dgp::SparseLinear {
            dim: 3,
            dictionary: DictionaryKind::Polynomial {
                degree: 2,
                interactions: false,
            },
            beta_star: vec![0.5, 1.0, 0.0, -0.5, 0.25],
            x_dist: XDist::Uniform,
            noise_sd,
        }
    }

    #[test]
    fn moments() {
        assert_eq!(XDist::Normal.moment(4), 3.0);
        assert_eq!(XDist::Normal.moment(6), 15.0);
        assert_eq!(XDist::Normal.moment(0), 1.0);
        assert_eq!(XDist::Uniform.moment(2), 1.0 / 3.0);
        assert_eq!(XDist::Uniform.moment(3), 0.0);
    }

    #[test]
    fn noiseless_sparse_linear_is_exact() {
        let dgp = sparse(0.0);
        let data = dgp.generate(50, 3).unwrap();
        let (dict, beta) = dgp.regression_model().unwrap();
        for i in 0..data.n() {
            assert_eq!(data.y(i), dict.evaluate(data.row(i)).unwrap().dot(&beta));
        }
    }

    #[test]
    fn same_seed_same_data() {
        let dgp = sparse(1.0);
        assert_eq!(dgp.generate(40, 11).unwrap(), dgp.generate(40, 11).unwrap());
        assert_ne!(dgp.generate(40, 11).unwrap(), dgp.generate(40, 12).unwrap());
    }

    #[test]
    fn ate_design_shape() {
        let dgp = Dgp::AteLogistic {
            d_z: 3,
            outcome_coefs: vec![1.0, 0.5, 0.0],
            tau: 1.0,
            propensity_coefs: vec![0.5, 0.0, 0.0],
            noise_sd: 1.0,
        };
        let data = dgp.generate(30, 1).unwrap();
        assert_eq!(data.dim(), 4);
        assert_eq!(data.treatment_col(), Some(0));
        assert_eq!(dgp.propensity(&[100.0, 0.0, 0.0]), Some(0.95));
    }

    #[test]
    fn invalid_parameters() {
        let mut dgp = sparse(-1.0);
        assert!(dgp.generate(10, 0).is_err());
        dgp = sparse(1.0);
        assert!(dgp.generate(1, 0).is_err());
        let too_long = Dgp::SparseLinear {
            dim: 1,
            dictionary: DictionaryKind::Identity,
            beta_star: vec![1.0, 2.0],
            x_dist: XDist::Normal,
            noise_sd: 1.0,
        };
        assert!(too_long.validate().is_err());
        let short = Dgp::AteLogistic {
            d_z: 2,
            outcome_coefs: vec![1.0],
            tau: 1.0,
            propensity_coefs: vec![0.0],
            noise_sd: 1.0,
        };
        assert!(short.validate().is_ok());
        assert_eq!(short.regression_model().unwrap().1.as_slice(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let bad = Dgp::AteLogistic {
            d_z: 2,
            outcome_coefs: vec![1.0, 0.0, 2.0],
            tau: 1.0,
            propensity_coefs: vec![0.0, 0.0],
            noise_sd: 1.0,
        };
        assert!(bad.validate().is_err());
        assert!(bad.regression_model().is_err());
    }
}
