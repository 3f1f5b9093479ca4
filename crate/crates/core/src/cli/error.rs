use std::fmt;

use crate::edma::EdmaError;
use crate::geomeval::GeomError;
use crate::meshio::MeshIoError;
use crate::morpho::MorphoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Invalid or inconsistent configuration (exit code 2).
    Config,
    /// Unreadable, malformed or inconsistent input data (exit code 3).
    Data,
    /// A numerical routine could not produce a result (exit code 4).
    Numeric,
}

/// A pipeline failure tagged with the stage, method and subject it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<String>,
    pub method: Option<String>,
    pub subject: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            stage: None,
            method: None,
            subject: None,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Data, message)
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Numeric, message)
    }

    pub fn in_stage(mut self, stage: &str) -> Self {
        self.stage.get_or_insert_with(|| stage.to_string());
        self
    }

    pub fn in_method(mut self, method: &str) -> Self {
        self.method.get_or_insert_with(|| method.to_string());
        self
    }

    pub fn in_subject(mut self, subject: &str) -> Self {
        self.subject.get_or_insert_with(|| subject.to_string());
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Config => "config error",
            ErrorKind::Data => "data error",
            ErrorKind::Numeric => "numeric error",
        };
        write!(f, "{kind}")?;
        if let Some(s) = &self.stage {
            write!(f, " in stage {s}")?;
        }
        if let Some(m) = &self.method {
            write!(f, ", method {m}")?;
        }
        if let Some(s) = &self.subject {
            write!(f, ", subject {s}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<MeshIoError> for CliError {
    fn from(e: MeshIoError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        let kind = match e {
            GeomError::DegenerateConfiguration(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<MorphoError> for CliError {
    fn from(e: MorphoError) -> Self {
        let kind = match e {
            MorphoError::LandmarkCountMismatch { .. } | MorphoError::NameMismatch { .. } => {
                ErrorKind::Data
            }
            MorphoError::TooFewSpecimens { .. } | MorphoError::GroupTooSmall(_) => ErrorKind::Config,
            _ => ErrorKind::Numeric,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<EdmaError> for CliError {
    fn from(e: EdmaError) -> Self {
        let kind = match e {
            EdmaError::GroupTooSmall(_) | EdmaError::EmptyGroup | EdmaError::InvalidAlpha(_) => {
                ErrorKind::Config
            }
            EdmaError::PairNameMismatch => ErrorKind::Data,
            _ => ErrorKind::Numeric,
        };
        CliError::new(kind, e.to_string())
    }
}
