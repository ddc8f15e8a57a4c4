use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1 within 1e-9")]
    NotNormalized { sum: f64 },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("{labels} labels but {values} values")]
    LengthMismatch { labels: usize, values: usize },
    #[error("empty domain")]
    EmptyDomain,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("label `{0}` is not in the domain")]
    UnknownLabel(String),
    #[error("domains do not match")]
    DomainMismatch,
    #[error("alpha must be > 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("beta must lie in (0, 1/2), got {0}")]
    BetaOutOfRange(f64),
    #[error("gamma must lie in (0, 1/2], got {0}")]
    GammaOutOfRange(f64),
    #[error("support of size {size} exceeds the exhaustive-search cap {cap}")]
    SupportTooLarge { size: usize, cap: usize },
    #[error("domain of size {size} exceeds the exhaustive-search cap {cap}")]
    DomainTooLarge { size: usize, cap: usize },
    #[error("family of 2^{n} functions exceeds the cap 2^{cap}")]
    TooManyFunctions { n: usize, cap: usize },
    #[error("family is not binary-valued")]
    NotBinary,
    #[error("entry {value} at row {row}, column {col} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("row {0} duplicates an earlier row")]
    DuplicateRow(usize),
    #[error("function family has no members")]
    EmptyFamily,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model is neither candidate of the pair")]
    CandidateNotInPair,
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("sample-size grid is empty")]
    EmptyGrid,
}

impl Error {
    /// Errors raised by size caps on exhaustive searches, as opposed to
    /// malformed input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::SupportTooLarge { .. } | Error::DomainTooLarge { .. } | Error::TooManyFunctions { .. }
        )
    }
}
