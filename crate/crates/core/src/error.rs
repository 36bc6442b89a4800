use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("domain error in `{node}` at t = {t}")]
    Domain { node: String, t: f64 },

    #[error("family `{family}` is not valid at t = {t}: {reason}")]
    Validity {
        family: String,
        t: f64,
        reason: String,
    },

    #[error("metric is not positive definite at {at:?}")]
    SingularMetric { at: Vec<f64> },

    #[error("stencil of radius {radius} leaves the chart domain at {at:?}")]
    StencilOutOfDomain { at: Vec<f64>, radius: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("covariant derivative of the curvature is required but was not computed")]
    MissingNablaR,

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
