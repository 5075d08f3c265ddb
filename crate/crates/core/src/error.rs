use std::path::PathBuf;

use thiserror::Error;

use crate::vocab::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // configuration
    #[error("beam width {beam_width} is not divisible by group count {groups}")]
    NonDivisibleBeam { beam_width: usize, groups: usize },
    #[error("beam width and group count must be at least 1")]
    EmptyBeam,
    #[error("strength `{name}` must be a finite value >= 0, got {value}")]
    NegativeStrength { name: &'static str, value: f64 },
    #[error("temperature must be finite and > 0, got {0}")]
    BadTemperature(f64),
    #[error("maximum length must be at least 1")]
    ZeroLength,
    #[error("n-gram order must be at least 1, got {0}")]
    BadN(usize),

    // vocabulary
    #[error("duplicate token `{0}`")]
    DuplicateToken(String),
    #[error("token list is empty")]
    EmptyTokenList,

    // scorers
    #[error("token id {id} is outside the vocabulary (size {size})")]
    InvalidTokenId { id: u32, size: usize },
    #[error("prefix continues after end-of-sequence")]
    PrefixAfterEos,
    #[error("row has length {found}, expected {expected}")]
    RowLengthMismatch { expected: usize, found: usize },
    #[error("row for prefix {prefix:?} is not normalized (probability mass {mass})")]
    UnnormalizedRow { prefix: Vec<TokenId>, mass: f64 },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("language model order must be at least 1, got {0}")]
    BadOrder(usize),
    #[error("add-k constant must be finite and >= 0, got {0}")]
    BadSmoothing(f64),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("unconditioned model assigns zero probability to token {0:?}")]
    ZeroUnconditionedProbability(TokenId),

    // model file
    #[error("unsupported model format version {found} (supported: {supported})")]
    FormatVersionMismatch { found: u16, supported: u16 },
    #[error("corrupt model payload: {0}")]
    CorruptPayload(String),

    // embeddings
    #[error("embedding file is empty")]
    EmptyFile,
    #[error("line {line}: expected {expected} components, found {found}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: component `{text}` is not a number")]
    NonNumericComponent { line: usize, text: String },

    // diversity / search
    #[error("penalty vectors have different lengths ({expected} vs {found})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("beam state holds no hypotheses")]
    EmptyState,
    #[error("search space {vocab}^{max_len} exceeds the exhaustive limit of {limit}")]
    SearchSpaceTooLarge {
        vocab: usize,
        max_len: usize,
        limit: u64,
    },
    #[error("decoding method `{0}` needs {1}")]
    MissingResource(&'static str, &'static str),

    // evaluation
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no non-empty references")]
    NoReferences,
    #[error("list is empty")]
    EmptyList,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid settings rather than data or I/O.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::NonDivisibleBeam { .. }
                | Error::EmptyBeam
                | Error::NegativeStrength { .. }
                | Error::BadTemperature(_)
                | Error::ZeroLength
                | Error::BadN(_)
                | Error::BadOrder(_)
                | Error::BadSmoothing(_)
                | Error::MissingResource(..)
        )
    }
}
