use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Arguments outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("profile is not L^p-normalized: norm = {norm}")]
    Normalization { norm: f64 },
    #[error("profile is identically zero")]
    ZeroProfile,
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    /// The two independent evaluation routes of an integral disagree.
    #[error("{name}: quadrature {quadrature} vs closed form {closed_form} (rel {rel:e})")]
    OracleDisagreement { name: &'static str, quadrature: f64, closed_form: f64, rel: f64 },
    #[error("no convergence: {0}")]
    NonConvergence(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
