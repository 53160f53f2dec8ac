use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Expression text does not conform to the grammar.
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    /// A coordinate lies outside the ambient (n, k) context.
    #[error("coordinate out of range: {0}")]
    CoordOutOfRange(String),
    /// Numeric evaluation hit a pole or a function domain boundary.
    #[error("evaluation error: {0}")]
    Eval(String),
    /// A vector field or point has the wrong number of components.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    /// Chart expressions mention level >= 1 coordinates or the Jacobian degenerates.
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    /// Sampling box is unusable (infinite bounds or trapped inside the slit margin).
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("singular metric: {0}")]
    SingularMetric(String),
    #[error("singular jacobian: {0}")]
    SingularJacobian(String),
    #[error("finsler axiom violation: {0}")]
    FinslerAxiomViolation(String),
    /// Bad integrator configuration, inadmissible initial state, or malformed problem input.
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
