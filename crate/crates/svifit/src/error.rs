//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by smile construction, calibration, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameters describe a curve with no finite minimum (ρ² = 1, or close
    /// enough that the minimum-point formulas overflow).
    #[error("degenerate skew: rho = {rho} has no finite minimum point")]
    DegenerateRho { rho: f64 },

    /// Invalid parameter or argument value.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Slope estimation through a three-point stencil needs an interior index.
    #[error("index {index} is on the boundary of {len} observations; a three-point stencil needs an interior index")]
    BoundaryIndex { index: usize, len: usize },

    /// Design matrix requires a strictly positive smoothing width.
    #[error("sigma must be positive, got {sigma}")]
    NonPositiveSigma { sigma: f64 },

    /// The normal equations are numerically singular.
    #[error("least-squares system is numerically singular (condition estimate {cond:.3e}); the smile is degenerate")]
    SingularSystem { cond: f64 },

    /// Observed and fitted sequences have different lengths.
    #[error("length mismatch: {left} observed vs {right} fitted")]
    LengthMismatch { left: usize, right: usize },

    /// A diagnostic formula was evaluated outside its domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// Rotated points no longer form a function graph.
    #[error("rotation by {theta} rad maps two observations to the same abscissa (within 1e-12); reduce the angle")]
    NotAFunction { theta: f64 },

    /// Rotation angle violates its admissible range.
    #[error("rotation angle {theta} rad is outside the admissible range {reason}")]
    InvalidTheta { theta: f64, reason: String },

    /// The mapped smoothing width came out imaginary.
    #[error("mapped sigma^2 = {sigma_sq} is negative; the rotated parameter set is invalid")]
    NegativeSigmaSquared { sigma_sq: f64 },

    /// Root bracketing for the inverse rotation failed.
    #[error("no sign change found for the inverse rotation after {doublings} range doublings at x = {x}")]
    BracketFailure { x: f64, doublings: usize },

    /// CSV input could not be parsed.
    #[error("parse error at row {row}, column {column}: {message}")]
    ParseError {
        row: usize,
        column: usize,
        message: String,
    },

    /// Fewer data rows than the three the linear solve needs.
    #[error("need at least 3 data points, got {n}")]
    TooFewPoints { n: usize },

    /// Two observations share the same log-moneyness.
    #[error("duplicate abscissa x = {x} at rows {first} and {second}")]
    DuplicateAbscissa { x: f64, first: usize, second: usize },

    /// Unknown simulation case id.
    #[error("unknown simulation case {id}; valid cases are 1-4")]
    UnknownCase { id: u32 },

    /// Underlying I/O failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Report is missing data a subcommand needs.
    #[error("report is missing {0}; re-run `fit` with --trace")]
    MissingReportData(&'static str),
}

impl Error {
    /// Process exit code the CLI maps this error to: 1 for input problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::ParseError { .. }
            | Error::TooFewPoints { .. }
            | Error::DuplicateAbscissa { .. }
            | Error::UnknownCase { .. }
            | Error::Io { .. }
            | Error::InvalidTheta { .. }
            | Error::BoundaryIndex { .. }
            | Error::LengthMismatch { .. }
            | Error::MissingReportData(_) => 1,
            Error::DegenerateRho { .. }
            | Error::NonPositiveSigma { .. }
            | Error::SingularSystem { .. }
            | Error::DomainError(_)
            | Error::NotAFunction { .. }
            | Error::NegativeSigmaSquared { .. }
            | Error::BracketFailure { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
