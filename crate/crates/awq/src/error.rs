use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("{what} did not converge within {terms} terms")]
    NonConvergent { what: String, terms: usize },
    #[error("divergent series: {0}")]
    DivergentSeries(String),
    #[error("denominator parameter vanishes at term {index}")]
    PoleInDenominator { index: usize },
    #[error("recurrence coefficient vanishes at n = {n}")]
    CoefficientVanishes { n: usize },
    #[error("weight has a pole on the unit circle: {0}")]
    PoleOnTorus(String),
    #[error("parameter pole: {0}")]
    ParameterPole(String),
    #[error("coefficient pole at sample point {point}")]
    PoleAtSample { point: String },
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("tensor degree mismatch: {lhs} vs {rhs}")]
    DegreeMismatch { lhs: usize, rhs: usize },
    #[error("quadrature did not converge with {nodes} nodes per axis")]
    NoConvergence { nodes: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
