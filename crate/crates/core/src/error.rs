use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One failed check found while validating a scenario config.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config has {} violation(s):\n{}", .0.len(), join_lines(.0))]
    Invalid(Vec<Violation>),

    #[error("{what} = {value} is outside the valid interval [{min}, {max}]")]
    Range {
        what: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid geometry: {0}")]
    Geometry(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("half-maximum crossing is ambiguous; crossings at {crossings:?} nm")]
    AmbiguousWidth { crossings: Vec<f64> },

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join_lines(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  - {x}")).collect::<Vec<_>>().join("\n")
}

/// Coarse error classes; each maps to a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Range,
    Numerical,
    DegenerateInput,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Range => 3,
            ErrorClass::Numerical => 4,
            ErrorClass::DegenerateInput => 5,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Invalid(_) | Error::Geometry(_) | Error::Io { .. } => {
                ErrorClass::Config
            }
            Error::Range { .. } | Error::Domain(_) => ErrorClass::Range,
            Error::AmbiguousWidth { .. } | Error::WindowTooSmall(_) | Error::Numerical(_) => ErrorClass::Numerical,
            Error::Degenerate(_) => ErrorClass::DegenerateInput,
            Error::Context { source, .. } => source.class(),
        }
    }

    /// Prefix with the config field or window involved; keeps the class.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn range(what: impl Into<String>, value: f64, min: f64, max: f64) -> Self {
        Error::Range {
            what: what.into(),
            value,
            min,
            max,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
