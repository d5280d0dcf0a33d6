use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Class of the binary target, used to name which side of a rate is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassLabel {
    Positive,
    Negative,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Positive => f.write_str("positive (long stay)"),
            ClassLabel::Negative => f.write_str("negative (short stay)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("rate undefined: no {0} rows present")]
    MissingClass(ClassLabel),

    #[error("stratification infeasible: {0}")]
    StratificationInfeasible(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema fingerprint mismatch: model expects {expected}, data has {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("infeasible fairness constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}
