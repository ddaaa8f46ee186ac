//! Basis dictionaries `b: R^d -> R^p` with analytic gradients.
//!
//! Basis ordering is fixed so that fitted coefficients are reproducible:
//!
//! * polynomial: the constant, then monomials by increasing total degree and,
//!   within a degree, lexicographically by exponent vector (`x1^2, x1 x2, x2^2`).
//!   Without interactions only pure powers `x_k^e` are kept, in the same order.
//! * fourier: the constant, then for each coordinate `k` and each order
//!   `o = 1..=order` the pair `cos(pi o x_k), sin(pi o x_k)`. Inputs are assumed
//!   to be scaled to `[-1, 1]` already.
//! * identity: `b(x) = x`.
//! * treatment interacted: `b(d, z) = (b_inner(z), d * b_inner(z))` where `d` is
//!   the coordinate at `treatment_index` and `z` the remaining coordinates in order.
//!   The gradient column for the treatment coordinate is identically zero since the
//!   treatment is discrete.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_finite, check_len, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionaryKind {
    Polynomial {
        degree: u32,
        #[serde(default)]
        interactions: bool,
    },
    Fourier {
        order: u32,
    },
    Identity,
    TreatmentInteracted {
        inner: Box<DictionaryKind>,
        #[serde(default)]
        treatment_index: usize,
    },
}

#[derive(Clone, Debug)]
enum Terms {
    /// One exponent vector per basis element.
    Monomials(Vec<Vec<u32>>),
    /// Constant followed by `(coordinate, order)` cos/sin pairs.
    Fourier(Vec<(usize, u32)>),
    Identity,
    Interacted {
        inner: Box<Dictionary>,
        treatment_index: usize,
    },
}

/// An immutable basis dictionary.
#[derive(Clone, Debug)]
pub struct Dictionary {
    kind: DictionaryKind,
    input_dim: usize,
    output_dim: usize,
    terms: Terms,
}

impl Dictionary {
    pub fn new(kind: DictionaryKind, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidDictionary("input_dim must be positive".into()));
        }
        let (terms, output_dim) = match &kind {
            DictionaryKind::Polynomial {
                degree,
                interactions,
            } => {
                if *degree == 0 {
                    return Err(Error::InvalidDictionary(
                        "polynomial degree must be at least 1".into(),
                    ));
                }
                let monomials = monomials(input_dim, *degree, *interactions);
                let p = monomials.len();
                (Terms::Monomials(monomials), p)
            }
            DictionaryKind::Fourier { order } => {
                if *order == 0 {
                    return Err(Error::InvalidDictionary(
                        "fourier order must be at least 1".into(),
                    ));
                }
                let pairs: Vec<(usize, u32)> = (0..input_dim)
                    .flat_map(|k| (1..=*order).map(move |o| (k, o)))
                    .collect();
                let p = 1 + 2 * pairs.len();
                (Terms::Fourier(pairs), p)
            }
            DictionaryKind::Identity => (Terms::Identity, input_dim),
            DictionaryKind::TreatmentInteracted {
                inner,
                treatment_index,
            } => {
                if matches!(**inner, DictionaryKind::TreatmentInteracted { .. }) {
                    return Err(Error::InvalidDictionary(
                        "treatment_interacted dictionaries cannot be nested".into(),
                    ));
                }
                if input_dim < 2 {
                    return Err(Error::InvalidDictionary(
                        "treatment_interacted needs a treatment and at least one other covariate"
                            .into(),
                    ));
                }
                if *treatment_index >= input_dim {
                    return Err(Error::InvalidDictionary(format!(
                        "treatment_index {treatment_index} out of range for input_dim {input_dim}"
                    )));
                }
                let inner = Dictionary::new((**inner).clone(), input_dim - 1)?;
                let p = 2 * inner.output_dim;
                (
                    Terms::Interacted {
                        inner: Box::new(inner),
                        treatment_index: *treatment_index,
                    },
                    p,
                )
            }
        };
        Ok(Dictionary {
            kind,
            input_dim,
            output_dim,
            terms,
        })
    }

    /// Builds the dictionary and checks that it has the expected number of elements.
    pub fn with_output_dim(kind: DictionaryKind, input_dim: usize, output_dim: usize) -> Result<Self> {
        let dict = Self::new(kind, input_dim)?;
        if dict.output_dim != output_dim {
            return Err(Error::InvalidDictionary(format!(
                "expected output_dim {output_dim}, but this kind yields {} on input_dim {input_dim}",
                dict.output_dim
            )));
        }
        Ok(dict)
    }

    pub fn identity(input_dim: usize) -> Result<Self> {
        Self::new(DictionaryKind::Identity, input_dim)
    }

    pub fn polynomial(input_dim: usize, degree: u32, interactions: bool) -> Result<Self> {
        Self::new(
            DictionaryKind::Polynomial {
                degree,
                interactions,
            },
            input_dim,
        )
    }

    pub fn fourier(input_dim: usize, order: u32) -> Result<Self> {
        Self::new(DictionaryKind::Fourier { order }, input_dim)
    }

    /// `(b(z), d b(z))` with the treatment in coordinate `treatment_index`.
    pub fn treatment_interacted(
        inner: DictionaryKind,
        input_dim: usize,
        treatment_index: usize,
    ) -> Result<Self> {
        Self::new(
            DictionaryKind::TreatmentInteracted {
                inner: Box::new(inner),
                treatment_index,
            },
            input_dim,
        )
    }

    pub fn kind(&self) -> &DictionaryKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Coordinate holding the treatment, for treatment-interacted dictionaries.
    pub fn treatment_index(&self) -> Option<usize> {
        match &self.terms {
            Terms::Interacted {
                treatment_index, ..
            } => Some(*treatment_index),
            _ => None,
        }
    }

    /// Exponent vectors of a polynomial dictionary, in basis order.
    pub fn monomial_exponents(&self) -> Option<&[Vec<u32>]> {
        match &self.terms {
            Terms::Monomials(m) => Some(m),
            _ => None,
        }
    }

    /// `(coordinate, order)` of each cos/sin pair of a Fourier dictionary.
    pub fn fourier_pairs(&self) -> Option<&[(usize, u32)]> {
        match &self.terms {
            Terms::Fourier(pairs) => Some(pairs),
            _ => None,
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        check_len("dictionary input", self.input_dim, x.len())?;
        check_finite("dictionary input", x)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let mut out = DVector::zeros(self.output_dim);
        self.evaluate_into(x, out.as_mut_slice());
        Ok(out)
    }

    /// Unchecked evaluation into a buffer of length `output_dim`.
    pub(crate) fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.terms {
            Terms::Monomials(monomials) => {
                for (slot, exps) in out.iter_mut().zip(monomials) {
                    *slot = exps
                        .iter()
                        .zip(x)
                        .filter(|(e, _)| **e > 0)
                        .map(|(e, xi)| xi.powi(*e as i32))
                        .product();
                }
            }
            Terms::Fourier(pairs) => {
                out[0] = 1.0;
                for (i, (k, o)) in pairs.iter().enumerate() {
                    let arg = PI * f64::from(*o) * x[*k];
                    out[1 + 2 * i] = arg.cos();
                    out[2 + 2 * i] = arg.sin();
                }
            }
            Terms::Identity => out.copy_from_slice(x),
            Terms::Interacted {
                inner,
                treatment_index,
            } => {
                let (d, z) = split_treatment(x, *treatment_index);
                let q = inner.output_dim;
                let (base, inter) = out.split_at_mut(q);
                inner.evaluate_into(&z, base);
                for (a, b) in inter.iter_mut().zip(base.iter()) {
                    *a = d * b;
                }
            }
        }
    }

    /// Jacobian `J[j, k] = d b_j / d x_k`, shape `output_dim x input_dim`.
    pub fn gradient(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        Ok(self.gradient_unchecked(x))
    }

    fn gradient_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.output_dim, self.input_dim);
        match &self.terms {
            Terms::Monomials(monomials) => {
                for (j, exps) in monomials.iter().enumerate() {
                    for k in 0..self.input_dim {
                        if exps[k] == 0 {
                            continue;
                        }
                        let mut v = f64::from(exps[k]) * x[k].powi(exps[k] as i32 - 1);
                        for (l, e) in exps.iter().enumerate() {
                            if l != k && *e > 0 {
                                v *= x[l].powi(*e as i32);
                            }
                        }
                        jac[(j, k)] = v;
                    }
                }
            }
            Terms::Fourier(pairs) => {
                for (i, (k, o)) in pairs.iter().enumerate() {
                    let freq = PI * f64::from(*o);
                    let arg = freq * x[*k];
                    jac[(1 + 2 * i, *k)] = -freq * arg.sin();
                    jac[(2 + 2 * i, *k)] = freq * arg.cos();
                }
            }
            Terms::Identity => jac.fill_with_identity(),
            Terms::Interacted {
                inner,
                treatment_index,
            } => {
                let (d, z) = split_treatment(x, *treatment_index);
                let inner_jac = inner.gradient_unchecked(&z);
                let q = inner.output_dim;
                for (kz, k) in (0..self.input_dim)
                    .filter(|k| k != treatment_index)
                    .enumerate()
                {
                    for j in 0..q {
                        jac[(j, k)] = inner_jac[(j, kz)];
                        jac[(q + j, k)] = d * inner_jac[(j, kz)];
                    }
                }
            }
        }
        jac
    }

    /// `J a` without forming the Jacobian; unchecked, `out` has length `output_dim`.
    pub(crate) fn directional_derivative_into(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        match &self.terms {
            Terms::Monomials(monomials) => {
                for (slot, exps) in out.iter_mut().zip(monomials) {
                    *slot = 0.0;
                    for k in 0..self.input_dim {
                        if exps[k] == 0 || a[k] == 0.0 {
                            continue;
                        }
                        let mut v = a[k] * f64::from(exps[k]) * x[k].powi(exps[k] as i32 - 1);
                        for (l, e) in exps.iter().enumerate() {
                            if l != k && *e > 0 {
                                v *= x[l].powi(*e as i32);
                            }
                        }
                        *slot += v;
                    }
                }
            }
            Terms::Fourier(pairs) => {
                out[0] = 0.0;
                for (i, (k, o)) in pairs.iter().enumerate() {
                    let freq = PI * f64::from(*o);
                    let arg = freq * x[*k];
                    out[1 + 2 * i] = -a[*k] * freq * arg.sin();
                    out[2 + 2 * i] = a[*k] * freq * arg.cos();
                }
            }
            Terms::Identity => out.copy_from_slice(a),
            Terms::Interacted {
                inner,
                treatment_index,
            } => {
                let (d, z) = split_treatment(x, *treatment_index);
                let (_, az) = split_treatment(a, *treatment_index);
                let q = inner.output_dim;
                let (base, inter) = out.split_at_mut(q);
                inner.directional_derivative_into(&z, &az, base);
                for (v, b) in inter.iter_mut().zip(base.iter()) {
                    *v = d * b;
                }
            }
        }
    }

    /// Rows `b(X_i)'` for `i` in `rows`.
    pub fn design_matrix(&self, data: &Dataset, rows: &[usize]) -> Result<DMatrix<f64>> {
        if rows.is_empty() {
            return Err(Error::EmptyRows("design matrix"));
        }
        check_len("dataset covariates", self.input_dim, data.dim())?;
        data.check_rows(rows)?;
        let mut out = DMatrix::zeros(rows.len(), self.output_dim);
        let mut buf = vec![0.0; self.output_dim];
        for (r, &i) in rows.iter().enumerate() {
            self.evaluate_into(data.row(i), &mut buf);
            for (j, v) in buf.iter().enumerate() {
                out[(r, j)] = *v;
            }
        }
        Ok(out)
    }
}

pub(crate) fn split_treatment(x: &[f64], treatment_index: usize) -> (f64, Vec<f64>) {
    let z = x
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != treatment_index)
        .map(|(_, v)| *v)
        .collect();
    (x[treatment_index], z)
}

fn monomials(dim: usize, degree: u32, interactions: bool) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; dim]];
    for total in 1..=degree {
        if interactions {
            let mut current = vec![0; dim];
            push_compositions(total, 0, &mut current, &mut out);
        } else {
            for k in 0..dim {
                let mut e = vec![0; dim];
                e[k] = total;
                out.push(e);
            }
        }
    }
    out
}

// Exponent vectors summing to `remaining`, lexicographically descending.
fn push_compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_compositions(remaining - e, pos + 1, current, out);
    }
    current[pos] = 0;
}
