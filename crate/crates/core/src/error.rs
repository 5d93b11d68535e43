use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument or model parameter lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Lévy measure fails `∫(1 − cos θ) ν(dθ) < ∞`.
    #[error("integrability error: {0}")]
    Integrability(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// The Bernstein function is bounded above by the requested level.
    #[error("not invertible: {0}")]
    NotInvertible(String),

    /// The spectral series has no square-integrable density to sum.
    #[error("divergent series: density class is {verdict}")]
    Divergence { verdict: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
