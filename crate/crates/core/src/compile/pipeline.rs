use std::cell::Cell;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::{Document, IdentityId};
use crate::synth::{eval, ErrorKind, EvalError, Expr, Imports};
use crate::value::Value;

/// A compiled fragment: the expression computing `identity` from the values
/// of `sources`, which it reads as inputs in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub identity: IdentityId,
    pub sources: Vec<IdentityId>,
    pub expr: Expr,
}

/// An executable program. Steps are in evaluation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipeline {
    pub name: String,
    pub inputs: Vec<IdentityId>,
    pub outputs: Vec<IdentityId>,
    pub steps: Vec<Step>,
    /// Test values of the data identities the steps read.
    pub data: BTreeMap<IdentityId, Value>,
    pub imports: Vec<String>,
    pub catalog_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("no value for {0}")]
    Unbound(IdentityId),
    #[error("evaluating {identity}: {error}")]
    Eval { identity: IdentityId, error: EvalError },
}

/// Runs a pipeline. `data` supplies data identity values; identities it lacks
/// fall back to the pipeline's test values.
pub fn execute(
    p: &Pipeline,
    inputs: &[Value],
    data: &BTreeMap<IdentityId, Value>,
    imports: &dyn Imports,
) -> Result<Vec<Value>, RunError> {
    if inputs.len() != p.inputs.len() {
        return Err(RunError::Arity {
            expected: p.inputs.len(),
            got: inputs.len(),
        });
    }
    let mut env: BTreeMap<IdentityId, Value> = p.data.clone();
    for (id, v) in data {
        if env.contains_key(id) {
            env.insert(*id, v.clone());
        }
    }
    env.extend(p.inputs.iter().copied().zip(inputs.iter().cloned()));
    for step in &p.steps {
        let args = step
            .sources
            .iter()
            .map(|s| env.get(s).cloned().ok_or(RunError::Unbound(*s)))
            .collect::<Result<Vec<_>, _>>()?;
        let v = eval(&step.expr, &args, imports).map_err(|error| RunError::Eval {
            identity: step.identity,
            error,
        })?;
        env.insert(step.identity, v);
    }
    p.outputs
        .iter()
        .map(|o| env.get(o).cloned().ok_or(RunError::Unbound(*o)))
        .collect()
}

/// Runs a pipeline against the current state of its document: data
/// identities take their runtime binding when one is set.
pub fn run_pipeline(
    p: &Pipeline,
    inputs: &[Value],
    d: &Document,
    imports: &dyn Imports,
) -> Result<Vec<Value>, RunError> {
    let data = p
        .data
        .keys()
        .filter_map(|id| d.runtime_value(*id).map(|v| (*id, v.clone())))
        .collect();
    execute(p, inputs, &data, imports)
}

#[derive(Clone)]
struct Entry {
    pipeline: Pipeline,
    data: BTreeMap<IdentityId, Value>,
}

/// Compiled programs callable by name. A program with one output returns
/// that value; with several it returns them as a list.
#[derive(Clone, Default)]
pub struct Library {
    programs: Arc<BTreeMap<String, Entry>>,
}

const MAX_CALL_DEPTH: usize = 64;

thread_local! {
    static DEPTH: Cell<usize> = const { Cell::new(0) };
}

impl Library {
    pub fn new() -> Self {
        Library::default()
    }

    /// Adds a program. `data` holds the runtime values of its data identities.
    pub fn with(self, pipeline: Pipeline, data: BTreeMap<IdentityId, Value>) -> Self {
        let mut programs = Arc::unwrap_or_clone(self.programs);
        programs.insert(pipeline.name.clone(), Entry { pipeline, data });
        Library {
            programs: Arc::new(programs),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Pipeline> {
        self.programs.get(name).map(|e| &e.pipeline)
    }
}

impl Imports for Library {
    fn names(&self) -> Vec<String> {
        self.programs.keys().cloned().collect()
    }

    fn arity(&self, name: &str) -> Option<usize> {
        self.programs.get(name).map(|e| e.pipeline.inputs.len())
    }

    fn call(&self, name: &str, args: &[Value]) -> Result<Value, EvalError> {
        let entry = self
            .programs
            .get(name)
            .ok_or_else(|| EvalError::with_detail(ErrorKind::UnknownImport, name))?;
        let depth = DEPTH.with(|d| d.get());
        if depth >= MAX_CALL_DEPTH {
            return Err(EvalError::with_detail(ErrorKind::Import, "imports nest too deeply"));
        }
        DEPTH.with(|d| d.set(depth + 1));
        let result = execute(&entry.pipeline, args, &entry.data, self);
        DEPTH.with(|d| d.set(depth));
        let mut outputs =
            result.map_err(|e| EvalError::with_detail(ErrorKind::Import, format!("{name}: {e}")))?;
        if outputs.len() == 1 {
            Ok(outputs.pop().expect("one output"))
        } else {
            Ok(Value::List(outputs))
        }
    }
}
