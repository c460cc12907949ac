//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants distinguish caller mistakes (`Dimension`, `Parameter`) from
/// numerical failures discovered mid-computation (`Divergence`,
/// `IllConditioned`, `Degenerate`, `MissingSource`) so front ends can map
/// them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs whose shapes disagree (channel counts, lengths, sample rates).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scalar argument or configuration field outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The learning update produced a non-finite filter coefficient.
    #[error(
        "unmixing update diverged (non-finite value) at frequency bin {bin} \
         during pass {pass}; try a smaller learning rate"
    )]
    Divergence { bin: usize, pass: usize },

    /// A per-bin matrix could not be inverted without regularization.
    #[error(
        "unmixing matrix at frequency bin {bin} is ill-conditioned \
         (condition estimate {cond:.3e}); retry with a nonzero ridge"
    )]
    IllConditioned { bin: usize, cond: f64 },

    /// Input that is structurally valid but carries no usable information
    /// (all-zero rows, flat sequences).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A mixing-matrix column with no usable peak in either sensor row.
    #[error("mixing column {column} has all-zero filters; no delay can be read from it")]
    MissingSource { column: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
