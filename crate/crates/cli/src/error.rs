use std::fmt::Display;

use seqom::agreement::AgreementError;
use seqom::align::AlignError;
use seqom::cluster::ClusterError;
use seqom::cost::CostError;
use seqom::matrix::MatrixError;
use seqom::seq::DataError;

/// Broad failure class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, stage: impl Into<String>, message: impl Display) -> Self {
        Self {
            kind,
            stage: stage.into(),
            message: message.to_string(),
        }
    }

    pub fn config(stage: impl Into<String>, message: impl Display) -> Self {
        Self::new(ErrorKind::Config, stage, message)
    }

    pub fn data(stage: impl Into<String>, message: impl Display) -> Self {
        Self::new(ErrorKind::Data, stage, message)
    }

    pub fn numeric(stage: impl Into<String>, message: impl Display) -> Self {
        Self::new(ErrorKind::Numeric, stage, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Maps library errors onto [`ErrorKind`].
pub trait Classify: Display {
    fn kind(&self) -> ErrorKind;
}

impl Classify for DataError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for MatrixError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for std::io::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for csv::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for serde_json::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for CostError {
    fn kind(&self) -> ErrorKind {
        match self {
            CostError::Io(_) | CostError::Csv(_) | CostError::Format(_) | CostError::Empty | CostError::Invalid(_) => {
                ErrorKind::Data
            }
            _ => ErrorKind::Config,
        }
    }
}

impl Classify for AlignError {
    fn kind(&self) -> ErrorKind {
        match self {
            AlignError::ThreadPool(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for ClusterError {
    fn kind(&self) -> ErrorKind {
        match self {
            ClusterError::InvalidK { .. } | ClusterError::UnknownInit(_) => ErrorKind::Config,
            ClusterError::LengthMismatch { .. } | ClusterError::LabelOutOfRange { .. } => ErrorKind::Data,
            _ => ErrorKind::Numeric,
        }
    }
}

impl Classify for AgreementError {
    fn kind(&self) -> ErrorKind {
        match self {
            AgreementError::LengthMismatch { .. }
            | AgreementError::InvalidWeight { .. }
            | AgreementError::DimensionMismatch(..)
            | AgreementError::LabelMismatch(_) => ErrorKind::Data,
            AgreementError::NoPermutations | AgreementError::UnknownCorrelation(_) | AgreementError::UnknownEmiMode(_) => {
                ErrorKind::Config
            }
            _ => ErrorKind::Numeric,
        }
    }
}

/// Attaches a stage name to a library error.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T, E: Classify> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| CliError::new(e.kind(), stage, &e))
    }
}
