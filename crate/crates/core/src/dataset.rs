//! Observations `(Y_i, X_i)` and CSV ingestion.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// An immutable sample of outcomes and covariates.
///
/// Covariates are stored row-major so a row can be handed to a dictionary
/// without copying.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    outcome: Vec<f64>,
    covariates: Vec<f64>,
    dim: usize,
    treatment_col: Option<usize>,
    names: Vec<String>,
}

impl Dataset {
    /// `covariates` is row-major with `outcome.len()` rows.
    pub fn new(outcome: Vec<f64>, covariates: Vec<f64>, dim: usize, treatment_col: Option<usize>) -> Result<Self> {
        let n = outcome.len();
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 observations, got {n}")));
        }
        if dim == 0 {
            return Err(Error::InvalidDataset("need at least one covariate".into()));
        }
        check_len("covariate entries", n * dim, covariates.len())?;
        if outcome.iter().chain(&covariates).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        if let Some(t) = treatment_col {
            if t >= dim {
                return Err(Error::InvalidDataset(format!(
                    "treatment column {t} out of range for {dim} covariates"
                )));
            }
            if let Some(i) = (0..n).find(|i| {
                let v = covariates[i * dim + t];
                v != 0.0 && v != 1.0
            }) {
                return Err(Error::InvalidDataset(format!(
                    "treatment column must be 0/1, row {i} has {}",
                    covariates[i * dim + t]
                )));
            }
        }
        let names = (1..=dim).map(|k| format!("x{k}")).collect();
        Ok(Dataset {
            outcome,
            covariates,
            dim,
            treatment_col,
            names,
        })
    }

    /// Builds a dataset from per-row covariate vectors.
    pub fn from_rows(outcome: Vec<f64>, rows: &[Vec<f64>], treatment_col: Option<usize>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "covariate row",
                expected: dim,
                got: bad.len(),
            });
        }
        check_len("covariate rows", outcome.len(), rows.len())?;
        Self::new(outcome, rows.concat(), dim, treatment_col)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        check_len("covariate names", self.dim, names.len())?;
        self.names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn treatment_col(&self) -> Option<usize> {
        self.treatment_col
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn y(&self, i: usize) -> f64 {
        self.outcome[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn check_rows(&self, rows: &[usize]) -> Result<()> {
        match rows.iter().find(|&&i| i >= self.n()) {
            Some(i) => Err(Error::InvalidArgument(format!(
                "row index {i} out of range for n = {}",
                self.n()
            ))),
            None => Ok(()),
        }
    }

    /// Same covariates with the outcome replaced.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        check_len("outcome", self.n(), outcome.len())?;
        let mut out = self.clone();
        out.outcome = outcome;
        Ok(out)
    }

    /// Rows reordered so that row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_len("permutation", self.n(), order.len())?;
        let mut seen = vec![false; self.n()];
        for &i in order {
            if i >= self.n() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        let mut out = self.clone();
        out.outcome = order.iter().map(|&i| self.outcome[i]).collect();
        out.covariates = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Ok(out)
    }

    /// Rescales every non-treatment covariate to unit sample variance. Constant
    /// columns are left as they are.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        let n = self.n() as f64;
        for k in (0..self.dim).filter(|k| Some(*k) != self.treatment_col) {
            let col: Vec<f64> = (0..self.n()).map(|i| self.row(i)[k]).collect();
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                let sd = var.sqrt();
                for i in 0..self.n() {
                    out.covariates[i * self.dim + k] /= sd;
                }
            }
        }
        out
    }

    /// Reads a CSV with a header row. `outcome` names the outcome column; every
    /// other column is a covariate in header order. `treatment`, if given, names
    /// one of the covariate columns as the binary treatment.
    pub fn from_csv_reader<R: Read>(reader: R, outcome: &str, treatment: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let y_col = header
            .iter()
            .position(|h| h == outcome)
            .ok_or_else(|| Error::config("outcome", format!("column `{outcome}` not in header")))?;
        let names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != y_col)
            .map(|(_, h)| h.clone())
            .collect();
        let treatment_col = match treatment {
            None => None,
            Some(t) => Some(names.iter().position(|h| h == t).ok_or_else(|| {
                Error::config("treatment", format!("column `{t}` not among covariates"))
            })?),
        };

        let mut ys = Vec::new();
        let mut xs = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            for (k, cell) in record.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::InvalidDataset(format!(
                        "non-numeric cell `{cell}` in column `{}` on data row {}",
                        header[k],
                        line + 1
                    ))
                })?;
                if k == y_col {
                    ys.push(v);
                } else {
                    xs.push(v);
                }
            }
        }
        Self::new(ys, xs, names.len(), treatment_col)?.with_names(names)
    }

    pub fn from_csv_path(path: &Path, outcome: &str, treatment: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, outcome, treatment)
    }

    /// Writes the dataset as CSV with header `y,<names>`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![format!("{:e}", self.y(i))];
            rec.extend(self.row(i).iter().map(|v| format!("{v:e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Lightweight summary for JSON echoes.
#[derive(Clone, Debug, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub dim: usize,
    pub covariates: Vec<String>,
    pub treatment_col: Option<usize>,
}

impl From<&Dataset> for DatasetSummary {
    fn from(d: &Dataset) -> Self {
        DatasetSummary {
            n: d.n(),
            dim: d.dim(),
            covariates: d.names.clone(),
            treatment_col: d.treatment_col,
        }
    }
}
