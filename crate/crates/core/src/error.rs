use thiserror::Error;

/// Everything that can go wrong while evaluating or checking a geometry.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error("domain error at {point:?}: {what}")]
    Domain { point: Vec<f64>, what: String },
    #[error("point {point:?} lies outside the chart")]
    OutOfDomain { point: Vec<f64> },
    #[error("metric is degenerate at {point:?}")]
    DegenerateMetric { point: Vec<f64> },
    #[error("frame is degenerate at {point:?}")]
    DegenerateFrame { point: Vec<f64> },
    #[error("quadrature order {0} is not supported")]
    InvalidOrder(usize),
    #[error("invalid sample plan: {0}")]
    InvalidPlan(String),
    #[error("form of degree {degree} does not fit in dimension {dim}")]
    DegreeOverflow { degree: usize, dim: usize },
    #[error("form is not closed (residual {residual:e})")]
    NotClosed { residual: f64 },
    #[error("metric and endomorphism are not compatible (residual {residual:e})")]
    NotCompatible { residual: f64 },
    #[error("endomorphism does not square to -1 (residual {residual:e})")]
    NotAlmostComplex { residual: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
