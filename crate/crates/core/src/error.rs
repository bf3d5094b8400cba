use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("family mismatch: {left} vs {right}")]
    FamilyMismatch { left: String, right: String },

    #[error("density is not normalizable")]
    NonNormalizable,

    #[error("division by a zero categorical entry at index {index}")]
    ZeroDivision { index: usize },

    #[error("degenerate projection: {moment} = {value}")]
    DegenerateProjection { moment: &'static str, value: f64 },

    #[error("invalid moments: {0}")]
    InvalidMoments(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("intractable marginalization at factor `{factor}`: {reason}")]
    IntractableMarginalization { factor: String, reason: String },

    #[error("intractable expectation at factor `{factor}`: {reason}")]
    IntractableExpectation { factor: String, reason: String },

    #[error("on edge {factor} -> {variable}: {source}")]
    Edge {
        factor: String,
        variable: String,
        #[source]
        source: Box<Error>,
    },

    #[error("assignment space of {states} states exceeds the bound of {bound}")]
    SpaceTooLarge { states: u128, bound: u128 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate cavity: precision {0} is not positive")]
    DegenerateCavity(f64),

    #[error("observation vector has zero sample variance")]
    ZeroObservationVariance,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("NMSE undefined for an all-zero reference vector")]
    ZeroReference,

    #[error("problem file: {0}")]
    ProblemFile(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
