//! Linear functionals `gamma -> m(x, gamma)` applied componentwise to a dictionary.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::dictionary::Dictionary;
use crate::error::{check_finite, check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Functional {
    /// `m(x, gamma) = a' grad gamma(x)`.
    AverageDerivative { direction: Vec<f64> },
    /// `m(x, gamma) = gamma(S x + c) - gamma(x)`; `transport_s` is row-major `d x d`.
    PolicyShift {
        transport_s: Vec<f64>,
        transport_c: Vec<f64>,
    },
    /// `m(x, gamma) = gamma(1, z) - gamma(0, z)` with the treatment in `treatment_col`.
    AverageTreatmentEffect { treatment_col: usize },
}

impl Functional {
    pub fn average_derivative(direction: Vec<f64>) -> Result<Self> {
        check_finite("direction", &direction)?;
        if direction.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument("direction must be non-zero".into()));
        }
        Ok(Functional::AverageDerivative { direction })
    }

    /// Affine transport `x -> S x + c`. `transport_s` is row-major.
    pub fn policy_shift(transport_s: Vec<f64>, transport_c: Vec<f64>) -> Result<Self> {
        let d = transport_c.len();
        check_len("transport matrix entries", d * d, transport_s.len())?;
        check_finite("transport", &transport_s)?;
        check_finite("transport", &transport_c)?;
        Ok(Functional::PolicyShift {
            transport_s,
            transport_c,
        })
    }

    /// Pure location shift `x -> x + c`.
    pub fn location_shift(shift: Vec<f64>) -> Result<Self> {
        let d = shift.len();
        let mut s = vec![0.0; d * d];
        for k in 0..d {
            s[k * d + k] = 1.0;
        }
        Self::policy_shift(s, shift)
    }

    pub fn ate(treatment_col: usize) -> Self {
        Functional::AverageTreatmentEffect { treatment_col }
    }

    pub fn check_compatible(&self, dict: &Dictionary) -> Result<()> {
        let d = dict.input_dim();
        match self {
            Functional::AverageDerivative { direction } => {
                check_len("direction", d, direction.len())?;
                if let Some(t) = dict.treatment_index() {
                    if direction[t] != 0.0 {
                        return Err(Error::Incompatible(
                            "derivative direction touches the discrete treatment coordinate".into(),
                        ));
                    }
                }
            }
            Functional::PolicyShift {
                transport_s,
                transport_c,
            } => {
                check_len("transport shift", d, transport_c.len())?;
                if let Some(t) = dict.treatment_index() {
                    let row = &transport_s[t * d..(t + 1) * d];
                    let fixes_treatment = row
                        .iter()
                        .enumerate()
                        .all(|(k, v)| *v == if k == t { 1.0 } else { 0.0 });
                    if !fixes_treatment || transport_c[t] != 0.0 {
                        return Err(Error::Incompatible(
                            "transport map must leave the treatment coordinate unchanged".into(),
                        ));
                    }
                }
            }
            Functional::AverageTreatmentEffect { treatment_col } => {
                if dict.treatment_index() != Some(*treatment_col) {
                    return Err(Error::Incompatible(format!(
                        "average treatment effect on column {treatment_col} needs a \
                         treatment_interacted dictionary with the same treatment index"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Also checks that the dataset designates the treatment column the functional uses.
    pub fn check_data(&self, dict: &Dictionary, data: &Dataset) -> Result<()> {
        self.check_compatible(dict)?;
        check_len("dataset covariates", dict.input_dim(), data.dim())?;
        if let Functional::AverageTreatmentEffect { treatment_col } = self {
            if data.treatment_col() != Some(*treatment_col) {
                return Err(Error::Incompatible(format!(
                    "dataset does not designate column {treatment_col} as the treatment"
                )));
            }
        }
        Ok(())
    }

    /// The transported point `S x + c`.
    pub fn transport(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Functional::PolicyShift {
                transport_s,
                transport_c,
            } => {
                let d = transport_c.len();
                Some(
                    (0..d)
                        .map(|r| {
                            transport_s[r * d..(r + 1) * d]
                                .iter()
                                .zip(x)
                                .map(|(s, v)| s * v)
                                .sum::<f64>()
                                + transport_c[r]
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// `(m(x, b_1), ..., m(x, b_p))`.
    pub fn m_of_basis(&self, dict: &Dictionary, x: &[f64]) -> Result<DVector<f64>> {
        self.check_compatible(dict)?;
        check_len("functional input", dict.input_dim(), x.len())?;
        check_finite("functional input", x)?;
        let mut out = DVector::zeros(dict.output_dim());
        let mut scratch = vec![0.0; dict.output_dim()];
        self.m_into(dict, x, out.as_mut_slice(), &mut scratch);
        Ok(out)
    }

    // Unchecked; `out` and `scratch` have length `output_dim`.
    pub(crate) fn m_into(&self, dict: &Dictionary, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        match self {
            Functional::AverageDerivative { direction } => {
                dict.directional_derivative_into(x, direction, out);
            }
            Functional::PolicyShift { .. } => {
                let moved = self.transport(x).expect("policy shift has a transport");
                dict.evaluate_into(&moved, out);
                dict.evaluate_into(x, scratch);
                for (o, s) in out.iter_mut().zip(scratch.iter()) {
                    *o -= s;
                }
            }
            Functional::AverageTreatmentEffect { treatment_col } => {
                let mut xt = x.to_vec();
                xt[*treatment_col] = 1.0;
                dict.evaluate_into(&xt, out);
                xt[*treatment_col] = 0.0;
                dict.evaluate_into(&xt, scratch);
                for (o, s) in out.iter_mut().zip(scratch.iter()) {
                    *o -= s;
                }
            }
        }
    }

    /// Rows `m(X_i, b)'` for `i` in `rows`.
    pub fn m_matrix(&self, dict: &Dictionary, data: &Dataset, rows: &[usize]) -> Result<DMatrix<f64>> {
        if rows.is_empty() {
            return Err(Error::EmptyRows("functional moments"));
        }
        self.check_data(dict, data)?;
        data.check_rows(rows)?;
        let p = dict.output_dim();
        let mut out = DMatrix::zeros(rows.len(), p);
        let mut buf = vec![0.0; p];
        let mut scratch = vec![0.0; p];
        for (r, &i) in rows.iter().enumerate() {
            self.m_into(dict, data.row(i), &mut buf, &mut scratch);
            for (j, v) in buf.iter().enumerate() {
                out[(r, j)] = *v;
            }
        }
        Ok(out)
    }

    /// Sample average of `m(X_i, b)` over `rows`.
    pub fn m_hat_vector(&self, dict: &Dictionary, data: &Dataset, rows: &[usize]) -> Result<DVector<f64>> {
        let m = self.m_matrix(dict, data, rows)?;
        Ok(column_means(&m))
    }

    /// `m(x, b' beta)`, computed through `m_of_basis` by linearity.
    pub fn m_of_gamma(&self, dict: &Dictionary, x: &[f64], beta: &DVector<f64>) -> Result<f64> {
        check_len("coefficients", dict.output_dim(), beta.len())?;
        Ok(self.m_of_basis(dict, x)?.dot(beta))
    }
}

pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::DictionaryKind;

    fn poly2() -> Dictionary {
        Dictionary::polynomial(1, 2, false).unwrap()
    }

    fn ti_linear() -> Dictionary {
        Dictionary::treatment_interacted(
            DictionaryKind::Polynomial {
                degree: 1,
                interactions: false,
            },
            2,
            0,
        )
        .unwrap()
    }

    #[test]
    fn average_derivative_equals_gradient_column() {
        let f = Functional::average_derivative(vec![1.0]).unwrap();
        assert_eq!(f.m_of_basis(&poly2(), &[2.0]).unwrap().as_slice(), &[0.0, 1.0, 4.0]);
    }

    #[test]
    fn identity_transport_is_zero() {
        let f = Functional::location_shift(vec![0.0, 0.0]).unwrap();
        let dict = Dictionary::polynomial(2, 3, true).unwrap();
        let m = f.m_of_basis(&dict, &[0.3, -1.2]).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ate_difference() {
        let f = Functional::ate(0);
        let m = f.m_of_basis(&ti_linear(), &[0.0, 0.5]).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 0.0, 1.0, 0.5]);
        let beta = DVector::from_vec(vec![0.0, 0.0, 2.5, 0.0]);
        assert_eq!(f.m_of_gamma(&ti_linear(), &[1.0, 0.5], &beta).unwrap(), 2.5);
    }

    #[test]
    fn m_of_gamma_values() {
        let f = Functional::average_derivative(vec![1.0]).unwrap();
        let zero = DVector::zeros(3);
        assert_eq!(f.m_of_gamma(&poly2(), &[2.0], &zero).unwrap(), 0.0);
        let square = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_eq!(f.m_of_gamma(&poly2(), &[2.0], &square).unwrap(), 4.0);
    }

    #[test]
    fn m_hat_averages() {
        let data = Dataset::from_rows(vec![0.0, 0.0], &[vec![0.0], vec![2.0]], None).unwrap();
        let f = Functional::average_derivative(vec![1.0]).unwrap();
        let m = f.m_hat_vector(&poly2(), &data, &[0, 1]).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 1.0, 2.0]);
        let single = f.m_hat_vector(&poly2(), &data, &[1]).unwrap();
        assert_eq!(single, f.m_of_basis(&poly2(), &[2.0]).unwrap());
        assert!(matches!(
            f.m_hat_vector(&poly2(), &data, &[]),
            Err(Error::EmptyRows(_))
        ));
    }

    #[test]
    fn compatibility_errors() {
        let ad = Functional::average_derivative(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            ad.m_of_basis(&ti_linear(), &[1.0, 0.2]),
            Err(Error::Incompatible(_))
        ));
        let ad_z = Functional::average_derivative(vec![0.0, 1.0]).unwrap();
        assert!(ad_z.m_of_basis(&ti_linear(), &[1.0, 0.2]).is_ok());
        let ate = Functional::ate(0);
        assert!(ate.m_of_basis(&Dictionary::identity(2).unwrap(), &[1.0, 0.0]).is_err());
        let shift = Functional::location_shift(vec![1.0, 0.0]).unwrap();
        assert!(shift.m_of_basis(&ti_linear(), &[1.0, 0.0]).is_err());
        assert!(Functional::average_derivative(vec![0.0]).is_err());
        assert!(ad.m_of_basis(&poly2(), &[1.0]).is_err());
        let data = Dataset::from_rows(vec![0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], None).unwrap();
        assert!(ate.m_hat_vector(&ti_linear(), &data, &[0, 1]).is_err());
    }
}
