use std::fmt;
use std::path::PathBuf;

/// A syntax or type error at a known place in a config or model file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.field, self.reason)
    }
}

impl ParseError {
    pub(crate) fn from_toml(text: &str, err: &toml::de::Error) -> Self {
        let line = err
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        let message = err.message().to_string();
        let field = message
            .split('`')
            .nth(1)
            .map(str::to_string)
            .or_else(|| err.span().and_then(|s| key_at(text, s.start)))
            .unwrap_or_else(|| "-".into());
        Self {
            line,
            field,
            reason: message,
        }
    }
}

/// The key on the line containing byte `offset`, if the line is `key = ...`.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let (key, _) = line.split_once('=')?;
    Some(key.trim().to_string())
}

/// A value that parsed but makes no sense.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error in {path}: {error}")]
    Parse { path: PathBuf, error: ParseError },
    #[error("invalid config:{}", .0.iter().map(|e| format!("\n  {e}")).collect::<String>())]
    Validation(Vec<FieldError>),
    #[error("{context}: {source}")]
    Runtime {
        context: String,
        #[source]
        source: brnsim_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} violation(s) found")]
    Violations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime { .. } | CliError::Io { .. } => 4,
            CliError::Violations(_) => 5,
        }
    }

    pub(crate) fn runtime(context: impl Into<String>) -> impl FnOnce(brnsim_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Runtime { context, source }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
