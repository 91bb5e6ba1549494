use std::fmt;

use thiserror::Error;

use crate::policy::DenyReason;

/// Stable, wire-visible error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorCode {
    MalformedQuery,
    Denied,
    NotFound,
    Expired,
    DuplicateKey,
    InvalidSelector,
    InvalidAttribute,
    InvalidRange,
    UnknownKey,
    StorageFailure,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 10] = [
        ErrorCode::MalformedQuery,
        ErrorCode::Denied,
        ErrorCode::NotFound,
        ErrorCode::Expired,
        ErrorCode::DuplicateKey,
        ErrorCode::InvalidSelector,
        ErrorCode::InvalidAttribute,
        ErrorCode::InvalidRange,
        ErrorCode::UnknownKey,
        ErrorCode::StorageFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::MalformedQuery => "MALFORMED_QUERY",
            ErrorCode::Denied => "DENIED",
            ErrorCode::NotFound => "NOT_FOUND",
            ErrorCode::Expired => "EXPIRED",
            ErrorCode::DuplicateKey => "DUPLICATE_KEY",
            ErrorCode::InvalidSelector => "INVALID_SELECTOR",
            ErrorCode::InvalidAttribute => "INVALID_ATTRIBUTE",
            ErrorCode::InvalidRange => "INVALID_RANGE",
            ErrorCode::UnknownKey => "UNKNOWN_KEY",
            ErrorCode::StorageFailure => "STORAGE_FAILURE",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorCode> {
        ErrorCode::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Errors produced on the query path (store, policy, api).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("malformed query: {0}")]
    Malformed(String),
    #[error("denied: {0}")]
    Denied(DenyReason),
    #[error("key not found: {0}")]
    NotFound(String),
    #[error("record expired: {0}")]
    Expired(String),
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("invalid selector: {0}")]
    InvalidSelector(String),
    #[error("invalid attribute: {0}")]
    InvalidAttribute(String),
    #[error("invalid time range: {start}..{end}")]
    InvalidRange { start: u64, end: u64 },
    #[error("key never seen: {0}")]
    UnknownKey(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::Malformed(_) => ErrorCode::MalformedQuery,
            Error::Denied(_) => ErrorCode::Denied,
            Error::NotFound(_) => ErrorCode::NotFound,
            Error::Expired(_) => ErrorCode::Expired,
            Error::DuplicateKey(_) => ErrorCode::DuplicateKey,
            Error::InvalidSelector(_) => ErrorCode::InvalidSelector,
            Error::InvalidAttribute(_) => ErrorCode::InvalidAttribute,
            Error::InvalidRange { .. } => ErrorCode::InvalidRange,
            Error::UnknownKey(_) => ErrorCode::UnknownKey,
            Error::Storage(_) => ErrorCode::StorageFailure,
        }
    }

    /// Rebuilds an error from a wire code and message.
    pub fn from_code(code: ErrorCode, message: &str) -> Error {
        let m = message.to_string();
        match code {
            ErrorCode::MalformedQuery => Error::Malformed(m),
            ErrorCode::Denied => Error::Denied(DenyReason::parse(message).unwrap_or(DenyReason::RoleForbidden)),
            ErrorCode::NotFound => Error::NotFound(m),
            ErrorCode::Expired => Error::Expired(m),
            ErrorCode::DuplicateKey => Error::DuplicateKey(m),
            ErrorCode::InvalidSelector => Error::InvalidSelector(m),
            ErrorCode::InvalidAttribute => Error::InvalidAttribute(m),
            ErrorCode::InvalidRange => {
                let (start, end) = message
                    .split_once("..")
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                    .unwrap_or((0, 0));
                Error::InvalidRange { start, end }
            }
            ErrorCode::UnknownKey => Error::UnknownKey(m),
            ErrorCode::StorageFailure => Error::Storage(m),
        }
    }

    /// The message half of `ERR <CODE> <message>`.
    pub fn wire_message(&self) -> String {
        match self {
            Error::Malformed(m)
            | Error::NotFound(m)
            | Error::Expired(m)
            | Error::DuplicateKey(m)
            | Error::InvalidSelector(m)
            | Error::InvalidAttribute(m)
            | Error::UnknownKey(m)
            | Error::Storage(m) => m.clone(),
            Error::Denied(r) => r.as_str().to_string(),
            Error::InvalidRange { start, end } => format!("{start}..{end}"),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Storage(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
