//! Error type shared across the toolkit.

use thiserror::Error;

/// Errors produced by panel construction, estimation, and the DGP harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A source file could not be parsed. Carries the 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// A uniqueness or referential invariant of the input data is violated.
    #[error("data integrity: {0}")]
    Integrity(String),

    /// Required series do not cover the months present in the trade data.
    #[error("coverage: {0}")]
    Coverage(String),

    /// An argument is outside the mathematical domain of an operation.
    #[error("domain: {0}")]
    Domain(String),

    /// The design matrix is rank deficient.
    #[error("collinear columns: {}", columns.join(", "))]
    Collinear { columns: Vec<String> },

    /// The instrument set cannot identify the endogenous coefficients.
    #[error("identification: {0}")]
    Identification(String),

    /// No within-group variation remains after demeaning.
    #[error("no within variation: {0}")]
    NoWithinVariation(String),

    /// HAC bandwidth is too large for the available series lengths.
    #[error("bandwidth {bandwidth} >= longest within-group series ({max_len})")]
    Bandwidth { bandwidth: usize, max_len: usize },

    /// Instrument selection could not satisfy the request.
    #[error("instrument selection: {0}")]
    Selection(String),

    /// A series is degenerate (zero variance) where variation is required.
    #[error("degenerate series: {0}")]
    Degenerate(String),

    /// The requested data subset is empty or otherwise unusable.
    #[error("data: {0}")]
    Data(String),

    /// Configuration is invalid or references missing inputs.
    #[error("config: {0}")]
    Config(String),

    /// A structural parameter configuration is singular.
    #[error("singular configuration: {0}")]
    Singular(String),

    /// A linear system could not be solved.
    #[error("numeric: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors rooted in configuration or input data rather than in
    /// the estimation itself. The CLI maps these to exit status 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Integrity(_)
                | Error::Coverage(_)
                | Error::Config(_)
                | Error::Data(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
