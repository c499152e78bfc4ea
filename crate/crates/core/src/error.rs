use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants are grouped by how a caller should react; [`Error::class`] maps
/// them onto the three classes the CLI turns into exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("evaluation point {theta} outside [-{delay}, 0]")]
    Domain { theta: f64, delay: f64 },
    #[error("grid or norm mismatch: {0}")]
    Mismatch(String),
    #[error("contour passes too close to a root after {attempts} perturbations")]
    Contour { attempts: usize },
    #[error("spectrum truncation incomplete: mode {mode} may have roots above the floor {floor}")]
    Truncation { mode: usize, floor: f64 },
    #[error("characteristic root {re}{im:+}i is not simple (|derivative| = {derivative:e})")]
    DegenerateRoot { re: f64, im: f64, derivative: f64 },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("solution norm {norm:e} exceeded the blow-up guard at t = {t}")]
    BlowUp { t: f64, norm: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("net construction failed: {0}")]
    NetConstruction(String),
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for exit codes and FFI status values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input, configuration or violated precondition.
    Usage,
    /// A numerical routine could not deliver a trustworthy answer.
    Numerical,
    /// Filesystem or serialization trouble.
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Malformed(_)
            | Error::Precondition(_)
            | Error::Domain { .. }
            | Error::Mismatch(_)
            | Error::DegenerateSample(_)
            | Error::Config(_) => ErrorClass::Usage,
            Error::Contour { .. }
            | Error::Truncation { .. }
            | Error::DegenerateRoot { .. }
            | Error::Integration(_)
            | Error::BlowUp { .. }
            | Error::Numerical(_)
            | Error::NetConstruction(_) => ErrorClass::Numerical,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Malformed(format!("{name} must be finite, got {x}")))
    }
}
