use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("amplitude encoding is undefined for an empty or all-zero input")]
    EncodingUndefined,
    #[error("input of dimension {dim} does not fit into {n_qubits} qubits")]
    InputTooLarge { dim: usize, n_qubits: usize },
    #[error("wire {wire} out of range for a {n_qubits}-qubit register")]
    WireOutOfRange { wire: usize, n_qubits: usize },
    #[error("wire {0} listed more than once")]
    DuplicateWire(usize),
    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("channel acts on {expected} qubits but {got} wires were given")]
    ArityMismatch { expected: usize, got: usize },
    #[error("Kraus operators violate completeness (max deviation {defect:e})")]
    IncompleteChannel { defect: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("selected class outcomes carry zero probability mass; cannot renormalize")]
    DegenerateRenormalization,
    #[error("gradient backend unsupported here: {0}")]
    UnsupportedBackend(String),
    #[error("input lies outside the attack domain [{lo}, {hi}]")]
    InputOutsideDomain { lo: f64, hi: f64 },

    #[error("zero noise certifies nothing (tau_D = 0)")]
    ZeroNoise,
    #[error("certified distance undefined at p = 1")]
    FullNoise,

    #[error("split `{0}` is empty")]
    EmptySplit(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("non-numeric value `{value}` in column `{column}` (row {row})")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("class `{0}` is empty")]
    EmptyClass(String),
    #[error("recipe: {0}")]
    Recipe(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front ends to pick exit codes.
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Io { .. } | Csv(_) | BadMagic { .. } | Truncated(_) | CountMismatch { .. }
            | UnknownColumn(_) | NonNumeric { .. } | EmptyClass(_) | Recipe(_) | EmptySplit(_)
            | Checkpoint(_) => ErrorCategory::Data,
            InvalidConfig(_) | ShapeMismatch(_) | InvalidProbability(_) | ArityMismatch { .. }
            | UnsupportedBackend(_) | InputTooLarge { .. } => ErrorCategory::Config,
            _ => ErrorCategory::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
