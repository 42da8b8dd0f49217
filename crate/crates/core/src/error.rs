use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported depth: maxval {0} (only 255 is accepted)")]
    UnsupportedDepth(u32),

    #[error("corrupt file{}: {reason}", path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    Corrupt {
        path: Option<PathBuf>,
        reason: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("class {class:?} has {count} samples; a stratified split needs at least 3")]
    Stratification { class: String, count: usize },

    #[error("undefined ROC curve: {0}")]
    UndefinedCurve(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn corrupt(reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: None,
            reason: reason.into(),
        }
    }

    /// Turn a decode failure into a corrupt-file error naming `path`.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Corrupt { path: None, reason } => Error::Corrupt {
                path: Some(path.into()),
                reason,
            },
            Error::UnsupportedFormat(reason) => Error::Corrupt {
                path: Some(path.into()),
                reason,
            },
            Error::UnsupportedDepth(d) => Error::Corrupt {
                path: Some(path.into()),
                reason: format!("unsupported maxval {d}"),
            },
            other => other,
        }
    }

    /// True for errors that stem from reading or decoding input files.
    pub fn is_io_like(&self) -> bool {
        matches!(
            self,
            Error::Io(_) | Error::Corrupt { .. } | Error::UnsupportedFormat(_) | Error::UnsupportedDepth(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
