use thiserror::Error;

/// Errors surfaced by corpus ingestion, statistics, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed corpus line: {reason}")]
    MalformedLine {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("dataset is empty, no probabilities definable")]
    EmptyDataset,

    #[error("dataset contains an unlabeled example at index {index}")]
    UnlabeledExample { index: usize },

    #[error("labels contain only one class")]
    SingleClass,

    #[error("undefined probability: {0}")]
    UndefinedProbability(String),

    #[error("no pair counts tracked for feature {feature}")]
    MissingPairCounts { feature: u32 },

    #[error("reference feature {feature} never occurs in the corpus")]
    EmptyReference { feature: u32 },

    #[error("reference imbalance I(r) is zero for feature {feature}")]
    ZeroImbalance { feature: u32 },

    #[error("imbalance undefined: {0}")]
    UndefinedImbalance(String),

    #[error("degenerate joint distribution: {0}")]
    DegenerateJoint(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: bad artifact file: {reason}")]
    BadArtifact { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
