use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("incompatible functional and dictionary: {0}")]
    Incompatible(String),

    #[error("empty index set for {0}")]
    EmptyRows(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{nuisance} fit in fold {fold} failed with solver status {status}")]
    FoldSolver {
        fold: usize,
        nuisance: &'static str,
        status: crate::rmd::SolverStatus,
    },

    #[error("no closed form: {0}")]
    NoClosedForm(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
