use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based line and column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    Lex,
    Parse,
    Type,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{origin}:{pos}: {kind:?}Error: {message}")]
pub struct FrontendError {
    pub kind: ErrorKind,
    pub origin: String,
    pub pos: Pos,
    pub message: String,
}

impl FrontendError {
    pub fn lex(pos: Pos, message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Lex, origin: String::new(), pos, message: message.into() }
    }

    pub fn parse(pos: Pos, message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Parse, origin: String::new(), pos, message: message.into() }
    }

    pub fn ty(pos: Pos, message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Type, origin: String::new(), pos, message: message.into() }
    }

    pub fn with_origin(mut self, origin: &str) -> Self {
        self.origin = origin.to_string();
        self
    }
}
