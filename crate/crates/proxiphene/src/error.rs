//! Crate-wide error type.
//!
//! Every fallible public operation returns [`Result`]. Variants are grouped by
//! failure class so callers (and the CLI) can map them to distinct exit codes.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file could not be read or written.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A CSV or JSON payload could not be parsed at all.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Input rows parsed but violate the data contract (bad score range,
    /// duplicate keys, malformed timestamps). `row` is the 1-based line
    /// number in the offending file when known.
    #[error("invalid input{}: {message}", fmt_location(.table, .row))]
    InvalidData {
        table: Option<String>,
        row: Option<u64>,
        message: String,
    },

    /// A caller violated a documented precondition of an in-process API.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The fixed-effect design is rank deficient and the caller did not ask
    /// for aliased columns to be dropped.
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    /// An iterative numerical routine failed to converge or produced a
    /// non-finite intermediate.
    #[error("numerical failure in {routine}: {message}")]
    Numerical { routine: String, message: String },

    /// A model-fitting routine detected mutually inconsistent inputs,
    /// e.g. a likelihood-ratio test between non-nested fits.
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
}

fn fmt_location(table: &Option<String>, row: &Option<u64>) -> String {
    match (table, row) {
        (Some(t), Some(r)) => format!(" ({t}, line {r})"),
        (Some(t), None) => format!(" ({t})"),
        (None, Some(r)) => format!(" (line {r})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: message.into() }
    }

    pub fn invalid_data(
        table: impl Into<String>,
        row: Option<u64>,
        message: impl Into<String>,
    ) -> Self {
        Error::InvalidData {
            table: Some(table.into()),
            row,
            message: message.into(),
        }
    }

    pub fn invalid_argument(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub fn numerical(routine: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numerical { routine: routine.into(), message: message.into() }
    }

    /// Stable exit code for the CLI, one per failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Parse { .. } => 3,
            Error::InvalidData { .. } => 4,
            Error::InvalidArgument(_) => 5,
            Error::RankDeficient(_) => 6,
            Error::Numerical { .. } => 7,
            Error::ModelMismatch(_) => 8,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_carry_location() {
        let e = Error::invalid_data("phq8.csv", Some(12), "score 25 outside 0..=24");
        let s = e.to_string();
        assert!(s.contains("phq8.csv"), "{s}");
        assert!(s.contains("line 12"), "{s}");
        assert!(s.contains("score 25"), "{s}");
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let errs = [
            Error::io("x", std::io::Error::other("boom")),
            Error::parse("x", "bad"),
            Error::invalid_data("t", None, "bad"),
            Error::invalid_argument("bad"),
            Error::RankDeficient("col".into()),
            Error::numerical("opt", "diverged"),
            Error::ModelMismatch("not nested".into()),
        ];
        let mut codes: Vec<i32> = errs.iter().map(|e| e.exit_code()).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), errs.len());
        assert!(codes.iter().all(|c| *c != 0 && *c != 1));
    }
}
