use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {n}: {reason}")]
    UnsupportedDimension { n: usize, reason: String },

    #[error("degenerate metric at {point:?}: {reason}")]
    DegenerateMetric { point: Vec<f64>, reason: String },

    #[error("point {point:?} outside the domain: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    #[error("{0}")]
    Parse(#[from] crate::expr::ParseError),

    #[error("domain error in `{node}`: {reason}")]
    ExprDomain { node: String, reason: String },

    #[error("invalid metric specification: {0}")]
    InvalidSpec(String),

    #[error("unsupported quadrature: {0}")]
    UnsupportedQuadrature(String),

    #[error("integrand is not finite at node {point:?} (value {value})")]
    PoisonedIntegrand { point: Vec<f64>, value: f64 },

    #[error("invalid radius schedule: {0}")]
    InvalidRadii(String),

    #[error("extrapolation failed: {0}")]
    Extrapolation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("metric is not Einstein: defect {defect:.3e} exceeds {tolerance:.1e}")]
    NotEinstein { defect: f64, tolerance: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
