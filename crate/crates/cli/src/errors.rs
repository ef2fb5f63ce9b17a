//! Exit codes and the error kinds that select them.

use std::fmt;

pub const EXIT_OK: i32 = 0;
/// Anything not covered below, including replay mismatches.
pub const EXIT_FAILURE: i32 = 1;
/// Bad arguments, configuration, or a broken operation precondition.
pub const EXIT_USAGE: i32 = 2;
/// Unreadable, malformed or inconsistent input data.
pub const EXIT_DATA: i32 = 3;
/// NaN or Inf during training.
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// A recipe stage exited with `code`; the recipe exits with the same code.
#[derive(Debug)]
pub struct StageFailed {
    pub code: i32,
    pub msg: String,
}

impl fmt::Display for StageFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for StageFailed {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<imagan::Error>() {
            return match e {
                imagan::Error::Contract(_) => EXIT_USAGE,
                imagan::Error::Io { .. }
                | imagan::Error::Parse { .. }
                | imagan::Error::Load(_)
                | imagan::Error::Split(_) => EXIT_DATA,
                imagan::Error::NonFinite(_) => EXIT_NUMERIC,
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(s) = cause.downcast_ref::<StageFailed>() {
            return s.code;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_DATA;
        }
    }
    EXIT_FAILURE
}
