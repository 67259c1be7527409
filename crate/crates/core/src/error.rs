//! Error types shared across the workbench.

use thiserror::Error;

/// Everything that can go wrong in the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// Algebra construction rejected (empty block list, zero-size block, ...).
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    /// Two elements with different parent algebras were combined.
    #[error("algebra mismatch: {0}")]
    AlgebraMismatch(String),

    /// Non-finite intermediate value, or an iterative routine failed to converge.
    #[error("numeric error: {0}")]
    NumericError(String),

    /// Optimizer configuration rejected.
    #[error("invalid config: {0}")]
    ConfigError(String),

    /// Syntax error in the formula language. Positions are 1-based.
    #[error("parse error at {line}:{col}: {msg}")]
    ParseError { line: usize, col: usize, msg: String },

    /// A free variable had no value bound to it during evaluation.
    #[error("unbound variable: {0}")]
    BindingError(String),

    /// A condition was checked against a tuple outside the unit ball.
    #[error("tuple outside the unit ball: {0}")]
    BallViolation(String),

    /// Invalid argument to a formula builder or invariant computation.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// Spectral cut impossible: eigenvalues too close to the cut point.
    #[error("no spectral gap: {0}")]
    NoSpectralGap(String),

    /// A correction routine could not repair its input.
    #[error("correction failed: {0}")]
    CorrectionFailed(String),

    /// No zero-set sampler / correction routine registered for this formula.
    #[error("formula not probeable: {0}")]
    NotProbeable(String),

    /// Bratteli level out of range for a non-periodic diagram.
    #[error("invalid level: {0}")]
    InvalidLevel(String),

    /// Operation requires a single-vertex (UHF-type) diagram.
    #[error("not a UHF diagram: {0}")]
    NotUhfDiagram(String),

    /// Diagram failed structural validation.
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),

    /// Malformed JSON or text input.
    #[error("bad input: {0}")]
    BadInput(String),
}

impl From<Error> for String {
    fn from(e: Error) -> String {
        e.to_string()
    }
}

pub type Result<T> = std::result::Result<T, Error>;
