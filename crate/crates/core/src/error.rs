use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid {lo_nm}..{hi_nm} nm does not cover transition {label} at {wavelength_nm:.3} nm")]
    Coverage {
        label: char,
        wavelength_nm: f64,
        lo_nm: f64,
        hi_nm: f64,
    },

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("need at least {needed} points, got {got}")]
    Arity { needed: usize, got: usize },

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(row: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            row,
            msg: msg.into(),
        }
    }
}
