use thiserror::Error;

/// Errors raised by the toolkit. Validation findings on a well-shaped model
/// are not errors; they are returned as a [`crate::model::ValidationReport`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: String,
        got: String,
    },
    #[error("singular Gram matrix {name}")]
    SingularGram { name: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
    #[error("model failed validation: {0}")]
    Validation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("misaligned time grids: {0}")]
    Alignment(String),
    #[error("explicit step dt={dt:.3e} violates the CFL bound; use dt <= {suggested:.3e} or the crank_nicolson scheme")]
    Cfl { dt: f64, suggested: f64 },
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("degenerate likelihood: every particle weight underflowed")]
    DegenerateLikelihood,
    #[error("mass leakage {leak:.3e} in the control run exceeds 1%; enlarge the grid domain")]
    BoundaryLeak { leak: f64 },
    #[error("exponential overflow in {what} (exponent {exponent:.3e})")]
    Overflow { what: String, exponent: f64 },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Shape { .. }
            | Error::Validation(_)
            | Error::InvalidGenerator(_)
            | Error::Unsupported(_)
            | Error::Alignment(_)
            | Error::UnknownPreset(_)
            | Error::Scenario(_) => ErrorClass::Validation,
            Error::SingularGram { .. }
            | Error::Numerical(_)
            | Error::Cfl { .. }
            | Error::Estimation(_)
            | Error::DegenerateLikelihood
            | Error::BoundaryLeak { .. }
            | Error::Overflow { .. } => ErrorClass::Numerical,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn shape(what: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            what: what.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
