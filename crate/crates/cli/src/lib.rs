//! Command-line pipeline: ingest, mine, train, generate, evaluate, report.

pub mod config;
pub mod manifest;
pub mod pipeline;

use cfproc_core::Error;

/// Process exit code for an error: 1 internal, 2 I/O, 3 data or
/// configuration, 4 artifact mismatch.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 2,
        Error::Schema(_) | Error::Data { .. } | Error::Argument(_) | Error::Precondition(_) => 3,
        Error::ArtifactMismatch(_) | Error::Format(_) => 4,
        Error::State(_) | Error::Capability(_) | Error::Numeric(_) => 1,
    }
}
