use thiserror::Error;

/// Errors raised by the group, measure, boundary and matrix machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what} exceeds the limit of {limit} elements{}", max_feasible.map(|n| format!(" (largest feasible n = {n})")).unwrap_or_default())]
    Resource {
        what: String,
        limit: usize,
        max_feasible: Option<usize>,
    },
    #[error("prefix too short: need {needed} letters, have {available}")]
    PrefixTooShort { needed: usize, available: usize },
    #[error("bilateral window exhausted: shift {shift} outside [{lo}, {hi}]")]
    WindowExhausted { shift: i64, lo: i64, hi: i64 },
    #[error("path is empty")]
    EmptyPath,
    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),
    #[error("rays are indistinguishable within the known depth {0}")]
    IndistinguishableRays(usize),
    #[error("operation needs a tree instance (free group or free product of Z_2 factors)")]
    NotATree,
    #[error("function is not harmonic: row sum {row_sum} at {at}")]
    NotHarmonic { row_sum: f64, at: String },
    #[error("zero-probability step at index {0}")]
    ZeroProbabilityStep(usize),
    #[error("numerical overflow: {0}")]
    Overflow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Resource errors map to a distinct exit code in the CLI.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}
