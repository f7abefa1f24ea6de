//! Program store and HTTP API for visual programs: CRUD over documents,
//! compilation with streamed progress, running, exporting to text and
//! managing imports.

pub mod api;
pub mod fs;
pub mod store;
pub mod workspace;

use std::io;

use zoea_core::compile::{CompileError, RunError};
use zoea_core::diagnostic::Diagnostic;

pub use api::{router, serve, AppState};
pub use store::{Recovery, Store, StoredProgram};
pub use workspace::{CompileJob, RunResult, UseEntry};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no program named `{0}`")]
    NotFound(String),
    #[error("a program named `{0}` already exists")]
    AlreadyExists(String),
    #[error("`{0}` is not a valid program id (letters, digits, `_`, `-`, `.`)")]
    InvalidId(String),
    #[error("document name `{name}` does not match program id `{id}`")]
    NameMismatch { id: String, name: String },
    #[error("stale revision; the current revision is {current}")]
    RevisionConflict { current: u64 },
    #[error("used by {}", .0.join(", "))]
    InUse(Vec<String>),
    #[error("`{0}` is already compiling")]
    AlreadyCompiling(String),
    #[error("the document has errors")]
    ValidationFailed(Vec<Diagnostic>),
    #[error("malformed document: {0}")]
    BadDocument(String),
    #[error("`{0}` has not been compiled")]
    NotCompiled(String),
    #[error("the pipeline was compiled from revision {pipeline_revision}, the document is at {revision}")]
    StalePipeline { pipeline_revision: u64, revision: u64 },
    #[error("imports would form a cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("storage error: {0}")]
    Io(#[from] io::Error),
}
