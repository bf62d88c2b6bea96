use std::fmt;
use std::path::Path;

use sivkit_core::Error as CoreError;

/// Exit status reported by the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Data = 3,
    Numerical = 4,
}

/// One-line diagnostic plus the exit code it maps to.
#[derive(Debug)]
pub struct AppError {
    pub kind: ExitKind,
    pub message: String,
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn usage(message: impl Into<String>) -> Self {
        AppError { kind: ExitKind::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        AppError { kind: ExitKind::Data, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        AppError { kind: ExitKind::Numerical, message: message.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        AppError::data(format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with where it happened.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AppError {}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        let kind = match e {
            CoreError::InvalidParameter { .. }
            | CoreError::Unsorted { .. }
            | CoreError::InvalidNormalization(_)
            | CoreError::InvalidSpectrum(_)
            | CoreError::OutOfBand { .. } => ExitKind::Data,
            CoreError::UnresolvableLine { .. }
            | CoreError::NoGuidedMode(_)
            | CoreError::UnreachableEfficiency { .. }
            | CoreError::UndefinedEfficiency
            | CoreError::Fit(_) => ExitKind::Numerical,
        };
        AppError { kind, message: e.to_string() }
    }
}
