//! Operations that combine the store with the compiler.

use std::sync::Arc;

use serde::Serialize;
use zoea_core::compile::{compile_document, run_pipeline, CompileError, CompileEvent, Compiled};
use zoea_core::diagnostic::has_errors;
use zoea_core::graph::{export_to_zoea, validate_document, IdentityId};
use zoea_core::synth::SearchConfig;
use zoea_core::text::print;
use zoea_core::value::Value;

use crate::store::{CompileGuard, Store, StoredProgram};
use crate::ServiceError;

/// A compilation that has passed its preconditions and holds the program's
/// compiling mark.
pub struct CompileJob {
    store: Arc<Store>,
    program: StoredProgram,
    _guard: CompileGuard,
}

impl CompileJob {
    /// Checks that the program exists, is not already compiling and has a
    /// valid document.
    pub fn prepare(store: &Arc<Store>, id: &str) -> Result<CompileJob, ServiceError> {
        let guard = store.begin_compile(id)?;
        let program = store.get(id)?;
        let diags = validate_document(&program.document);
        if has_errors(&diags) {
            return Err(ServiceError::ValidationFailed(diags));
        }
        Ok(CompileJob {
            store: store.clone(),
            program,
            _guard: guard,
        })
    }

    pub fn program(&self) -> &StoredProgram {
        &self.program
    }

    /// Compiles and, on success, stores the pipeline tagged with the compiled
    /// revision. Events other than the terminal record go to `sink` as they
    /// happen; the terminal record is passed to `sink` only after the
    /// pipeline is stored, and is turned into a failure if storing fails.
    pub fn run(self, config: &SearchConfig, sink: &mut dyn FnMut(&CompileEvent)) -> Result<Compiled, ServiceError> {
        let library = self.store.library(&self.program.document.uses);
        let mut terminal = None;
        let result = compile_document(&self.program.document, config, Arc::new(library), &mut |e| {
            if e.is_terminal() {
                terminal = Some(e.clone());
            } else {
                sink(e);
            }
        });
        let stored = match &result {
            Ok(c) => self
                .store
                .set_pipeline(&self.program.id, self.program.revision, c.pipeline.clone())
                .map(|_| ()),
            Err(_) => Ok(()),
        };
        match (stored, terminal) {
            (Ok(()), Some(t)) => sink(&t),
            (Err(e), _) => {
                sink(&CompileEvent::Finished {
                    result: zoea_core::compile::Outcome::Failure,
                    failed: Vec::new(),
                });
                return Err(e);
            }
            (Ok(()), None) => {}
        }
        result.map_err(ServiceError::Compile)
    }
}

/// Compiles a stored program to completion.
pub fn compile(
    store: &Arc<Store>,
    id: &str,
    config: &SearchConfig,
    sink: &mut dyn FnMut(&CompileEvent),
) -> Result<Compiled, ServiceError> {
    CompileJob::prepare(store, id)?.run(config, sink)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub outputs: Vec<Value>,
    pub input_labels: Vec<Option<String>>,
    pub output_labels: Vec<Option<String>>,
}

/// Runs the current pipeline of a program with its runtime data bindings.
pub fn run(store: &Store, id: &str, inputs: &[Value]) -> Result<RunResult, ServiceError> {
    let program = store.get(id)?;
    let Some((pipeline, compiled_from)) = &program.pipeline else {
        return Err(ServiceError::NotCompiled(id.to_string()));
    };
    if *compiled_from != program.revision {
        return Err(ServiceError::StalePipeline {
            pipeline_revision: *compiled_from,
            revision: program.revision,
        });
    }
    let library = store.library(&program.document.uses);
    let outputs = run_pipeline(pipeline, inputs, &program.document, &library)?;
    let labels = |ids: &[IdentityId]| ids.iter().map(|i| program.document.label_of(*i)).collect();
    Ok(RunResult {
        outputs,
        input_labels: labels(&pipeline.inputs),
        output_labels: labels(&pipeline.outputs),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UseEntry {
    pub program: String,
    pub compiled: bool,
    pub selected: bool,
}

/// Every other stored program, whether it can be imported, and whether this
/// program imports it.
pub fn uses(store: &Store, id: &str) -> Result<Vec<UseEntry>, ServiceError> {
    let program = store.get(id)?;
    Ok(store
        .list()
        .into_iter()
        .filter(|p| p.id != id)
        .map(|p| UseEntry {
            selected: program.document.uses.contains(&p.id),
            compiled: p.is_compiled(),
            program: p.id,
        })
        .collect())
}

/// The program in the textual dialect.
pub fn export(store: &Store, id: &str) -> Result<String, ServiceError> {
    let program = store.get(id)?;
    let diags = validate_document(&program.document);
    if has_errors(&diags) {
        return Err(ServiceError::ValidationFailed(diags));
    }
    let text = export_to_zoea(&program.document).map_err(|e| match e {
        zoea_core::graph::GraphError::ValidationFailed(d) => ServiceError::ValidationFailed(d),
        other => ServiceError::BadDocument(other.to_string()),
    })?;
    Ok(print(&text))
}

/// Whether a compile error came from the document rather than the search.
pub fn is_document_error(e: &CompileError) -> bool {
    matches!(e, CompileError::Invalid(_) | CompileError::UnresolvedUse(_))
}
