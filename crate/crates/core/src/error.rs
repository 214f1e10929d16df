use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Some group element moves a masked node outside the domain.
    #[error("domain is not invariant under the group: element {element} moves node ({x}, {y}) outside by {excess:.3e}")]
    InvariantDomainViolation {
        element: usize,
        x: f64,
        y: f64,
        excess: f64,
    },

    /// The functional is not invariant under the group at the given field.
    #[error("functional is not G-invariant: deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    NotInvariant { deviation: f64, tolerance: f64 },

    #[error("minimization diverged at iteration {iteration}: energy {energy}")]
    Divergence { iteration: usize, energy: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
