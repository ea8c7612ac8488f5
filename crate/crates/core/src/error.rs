use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular integrand: modulus vanishes at s = {0}")]
    SingularIntegrand(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),
    #[error("mollification margin: {0}")]
    Margin(String),
    #[error("frame is not transverse to the vertical subspace at {point:?}")]
    Transversality { point: Vec<f64> },
    #[error("trajectory left the domain at time {time} (position {point:?})")]
    Escape { time: f64, point: Vec<f64> },
    #[error("evaluation produced a non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("separable branch crossed a zero of G in component {component}")]
    BranchCrossing { component: usize },
    #[error("cone condition violated at {point:?}: angle {angle}")]
    Cone { point: Vec<f64>, angle: f64 },
    #[error("degenerate subspace: {0}")]
    Degenerate(String),
    #[error("malformed input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
