//! Error type shared by the whole crate.

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A caller-supplied value is outside the accepted range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Several required inputs are absent; all of them are listed.
    #[error("missing required fields: {}", .0.join(", "))]
    MissingFields(Vec<String>),

    /// A formula was evaluated outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The closed-loop dynamics do not admit a stationary state.
    #[error("unstable dynamics: eigenvalue {eigenvalue} has non-negative real part")]
    Unstable { eigenvalue: Complex64 },

    /// A closed-form expression hit a vanishing denominator.
    #[error("singular denominator: {0}")]
    SingularDenominator(String),

    /// The spectral solver cannot form a well-conditioned eigenbasis.
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    /// A numerical evaluation failed (pole, non-convergence, loss of precision).
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// An optimizer finished without a usable minimum.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// A simulated trajectory left the physical region.
    #[error("trajectory {trajectory} diverged at t = {time:.3}: |state| exceeded {threshold:e}")]
    Diverged {
        time: f64,
        trajectory: usize,
        threshold: f64,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used to flag failed rows in CSV output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::MissingFields(_) => "missing-fields",
            Error::Domain(_) => "domain",
            Error::Unstable { .. } => "unstable",
            Error::SingularDenominator(_) => "singular",
            Error::DegenerateSpectrum(_) => "degenerate-spectrum",
            Error::Evaluation(_) => "evaluation",
            Error::Optimization(_) => "optimization",
            Error::Diverged { .. } => "diverged",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
