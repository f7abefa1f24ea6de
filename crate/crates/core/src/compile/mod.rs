//! Compiling documents into pipelines.
//!
//! Every derive and output identity is a target. Each target becomes its own
//! synthesis problem: one row per case in which the target has a value, with
//! the values of its source identities as inputs. Targets are compiled left to
//! right, so sources are always solved before the targets that read them.

mod events;
mod pipeline;
mod program;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostic::{has_errors, Diagnostic};
use crate::graph::{validate_document, ColumnKind, Document, GraphError, IdentityId};
use crate::synth::{
    synthesize, Example, Expr, Imports, SearchConfig, Statistics, SynthesisProblem,
    CATALOG_VERSION,
};
use crate::value::Value;

pub use events::{check_events, CompileEvent, Outcome, State};
pub use pipeline::{execute, run_pipeline, Library, Pipeline, RunError, Step};
pub use program::{compile_zoea_text, program_to_document};

/// One row of a synthetic case: the source values in one user case and the
/// target's value there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticRow {
    pub case: String,
    pub inputs: Vec<Value>,
    pub output: Value,
}

/// The synthesis problem for one target identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticCase {
    pub target: IdentityId,
    pub sources: Vec<IdentityId>,
    pub rows: Vec<SyntheticRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTarget {
    pub identity: IdentityId,
    pub sources: Vec<IdentityId>,
    /// False when the target has no dependencies and reads every earlier column.
    pub from_dependencies: bool,
}

/// Targets in compilation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompilationPlan {
    pub targets: Vec<PlannedTarget>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileFailure {
    pub failed: Vec<IdentityId>,
    /// Why each failed identity failed.
    pub reasons: BTreeMap<IdentityId, String>,
    pub stats: BTreeMap<IdentityId, Statistics>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("the document is not ready to compile")]
    Invalid(Vec<Diagnostic>),
    #[error("`use: {0}` does not name a compiled program")]
    UnresolvedUse(String),
    #[error("compilation failed for {}", list(&.0.failed))]
    Failed(CompileFailure),
}

fn list(ids: &[IdentityId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// A successful compilation.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub pipeline: Pipeline,
    pub stats: BTreeMap<IdentityId, Statistics>,
}

impl Compiled {
    pub fn candidates_expanded(&self) -> u64 {
        self.stats.values().map(|s| s.candidates_expanded).sum()
    }
}

fn column_of(key: &crate::graph::PositionKey) -> (ColumnKind, usize) {
    (key.0, key.1)
}

/// The value an identity contributes in case `k`: data identities always use
/// their test value, others the element value in that case.
fn source_value(d: &Document, k: usize, id: IdentityId) -> Option<&Value> {
    match d.identity_info(id) {
        Some((_, ColumnKind::Data)) => d.data_value(id),
        _ => d.element_in_case(k, id).map(|e| &e.value).filter(|v| !v.is_empty_marker()),
    }
}

fn target_cases(d: &Document, target: IdentityId) -> Vec<usize> {
    (0..d.cases.len())
        .filter(|&k| d.element_in_case(k, target).is_some_and(|e| !e.is_empty()))
        .collect()
}

/// Orders targets and picks their sources. Assumes a valid document.
pub fn plan(d: &Document) -> CompilationPlan {
    let deps = d.identity_dependencies();
    let mut targets = Vec::new();
    let candidates: Vec<IdentityId> = d
        .identities_of(ColumnKind::Derive)
        .into_iter()
        .chain(d.identities_of(ColumnKind::Output))
        .collect();
    for &target in &candidates {
        let key = d.position_key(target).expect("identity has elements");
        let declared = deps.get(&target).filter(|s| !s.is_empty());
        let (sources, from_dependencies) = match declared {
            Some(set) => {
                let mut s: Vec<IdentityId> = set.iter().copied().collect();
                s.sort_by_key(|id| d.position_key(*id));
                (s, true)
            }
            None => {
                let rows = target_cases(d, target);
                let s = d
                    .identities_of(ColumnKind::Data)
                    .into_iter()
                    .chain(d.identities_of(ColumnKind::Input))
                    .chain(d.identities_of(ColumnKind::Derive))
                    .filter(|id| {
                        d.position_key(*id)
                            .is_some_and(|k| column_of(&k) < column_of(&key))
                    })
                    .filter(|id| rows.iter().all(|&k| source_value(d, k, *id).is_some()))
                    .collect();
                (s, false)
            }
        };
        targets.push(PlannedTarget {
            identity: target,
            sources,
            from_dependencies,
        });
    }
    CompilationPlan { targets }
}

fn ready(d: &Document) -> Result<(), Vec<Diagnostic>> {
    let diags = validate_document(d);
    if has_errors(&diags) {
        Err(diags)
    } else {
        Ok(())
    }
}

fn synthetic_case(d: &Document, t: &PlannedTarget) -> SyntheticCase {
    let rows = target_cases(d, t.identity)
        .into_iter()
        .map(|k| SyntheticRow {
            case: d.cases[k].id.clone(),
            inputs: t
                .sources
                .iter()
                .map(|s| source_value(d, k, *s).cloned().unwrap_or(Value::Null))
                .collect(),
            output: d.element_in_case(k, t.identity).expect("row case").value.clone(),
        })
        .collect();
    SyntheticCase {
        target: t.identity,
        sources: t.sources.clone(),
        rows,
    }
}

/// One synthetic case per derive and output identity, in compilation order.
pub fn build_synthetic_cases(d: &Document) -> Result<Vec<SyntheticCase>, GraphError> {
    ready(d).map_err(GraphError::ValidationFailed)?;
    Ok(plan(d).targets.iter().map(|t| synthetic_case(d, t)).collect())
}

/// Only the programs named in a document's `uses`.
struct Scoped {
    inner: Arc<dyn Imports>,
    names: Vec<String>,
}

impl Imports for Scoped {
    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn arity(&self, name: &str) -> Option<usize> {
        if self.names.iter().any(|n| n == name) {
            self.inner.arity(name)
        } else {
            None
        }
    }

    fn call(&self, name: &str, args: &[Value]) -> Result<Value, crate::synth::EvalError> {
        self.inner.call(name, args)
    }
}

/// Replaces constants equal to the value of a data identity with a reference
/// to that identity, so runtime bindings of the data reach the fragment.
fn wire_data(e: &Expr, data: &[(IdentityId, Value)], sources: &mut Vec<IdentityId>) -> Expr {
    match e {
        Expr::Const(v) => match data.iter().find(|(_, dv)| dv == v) {
            Some((id, _)) => {
                let index = match sources.iter().position(|s| s == id) {
                    Some(i) => i,
                    None => {
                        sources.push(*id);
                        sources.len() - 1
                    }
                };
                Expr::Input(index)
            }
            None => e.clone(),
        },
        Expr::Input(_) | Expr::Slot => e.clone(),
        Expr::Apply(p, args) => Expr::Apply(*p, args.iter().map(|a| wire_data(a, data, sources)).collect()),
        Expr::CallImport(n, args) => {
            Expr::CallImport(n.clone(), args.iter().map(|a| wire_data(a, data, sources)).collect())
        }
        Expr::If(p, t, f) => Expr::if_(
            wire_data(p, data, sources),
            wire_data(t, data, sources),
            wire_data(f, data, sources),
        ),
        Expr::MapOver(l, b) => Expr::map(wire_data(l, data, sources), wire_data(b, data, sources)),
    }
}

/// Compiles every target of a valid document. Progress is reported to `sink`
/// as status events followed by exactly one terminal record.
pub fn compile_document(
    d: &Document,
    config: &SearchConfig,
    imports: Arc<dyn Imports>,
    sink: &mut dyn FnMut(&CompileEvent),
) -> Result<Compiled, CompileError> {
    let started = Instant::now();
    let ts = || started.elapsed().as_millis() as u64;
    let finish = |sink: &mut dyn FnMut(&CompileEvent), result: Outcome, failed: Vec<IdentityId>| {
        sink(&CompileEvent::Finished { result, failed });
    };

    if let Some(u) = d.uses.iter().find(|u| imports.arity(u).is_none()) {
        finish(sink, Outcome::Failure, Vec::new());
        return Err(CompileError::UnresolvedUse(u.clone()));
    }
    if let Err(diags) = ready(d) {
        finish(sink, Outcome::Failure, Vec::new());
        return Err(CompileError::Invalid(diags));
    }
    let scoped: Arc<dyn Imports> = Arc::new(Scoped {
        inner: imports.clone(),
        names: d.uses.clone(),
    });

    let plan = plan(d);
    for t in &plan.targets {
        sink(&CompileEvent::status(t.identity, State::Pending, ts(), None));
    }

    let data: Vec<(IdentityId, Value)> = d
        .identities_of(ColumnKind::Data)
        .into_iter()
        .filter_map(|id| d.data_value(id).map(|v| (id, v.clone())))
        .collect();
    let mut solved: BTreeMap<IdentityId, Expr> = BTreeMap::new();
    let mut failed: BTreeSet<IdentityId> = BTreeSet::new();
    let mut reasons = BTreeMap::new();
    let mut stats = BTreeMap::new();

    for t in &plan.targets {
        sink(&CompileEvent::status(t.identity, State::Active, ts(), None));
        if let Some(bad) = t.sources.iter().find(|s| failed.contains(s)) {
            let none = Statistics::default();
            sink(&CompileEvent::status(t.identity, State::Failed, ts(), Some(none.clone())));
            failed.insert(t.identity);
            reasons.insert(t.identity, format!("depends on {bad}, which failed"));
            stats.insert(t.identity, none);
            continue;
        }
        let case = synthetic_case(d, t);
        let pool: Vec<Value> = data
            .iter()
            .filter(|(id, _)| !t.sources.contains(id))
            .map(|(_, v)| v.clone())
            .collect();
        let problem = SynthesisProblem::new(
            case.rows
                .into_iter()
                .map(|r| Example::new(r.inputs, r.output))
                .collect(),
        )
        .with_constants(pool)
        .with_imports(scoped.clone());
        match synthesize(&problem, config) {
            Ok(s) => {
                sink(&CompileEvent::status(t.identity, State::Solved, ts(), Some(s.stats.clone())));
                stats.insert(t.identity, s.stats);
                solved.insert(t.identity, s.expr);
            }
            Err(f) => {
                sink(&CompileEvent::status(t.identity, State::Failed, ts(), Some(f.stats.clone())));
                failed.insert(t.identity);
                reasons.insert(t.identity, f.reason.to_string());
                stats.insert(t.identity, f.stats);
            }
        }
    }

    let outputs = d.identities_of(ColumnKind::Output);
    let failed: Vec<IdentityId> = failed.into_iter().collect();
    if !outputs.iter().all(|o| solved.contains_key(o)) {
        finish(sink, Outcome::Failure, failed.clone());
        return Err(CompileError::Failed(CompileFailure { failed, reasons, stats }));
    }

    let pipeline = assemble(d, &plan, &solved, &data);
    replay(d, &pipeline, imports.as_ref());
    finish(sink, Outcome::Success, failed);
    Ok(Compiled { pipeline, stats })
}

/// Builds the pipeline from solved fragments, keeping only the steps the
/// outputs need.
fn assemble(
    d: &Document,
    plan: &CompilationPlan,
    solved: &BTreeMap<IdentityId, Expr>,
    data: &[(IdentityId, Value)],
) -> Pipeline {
    let mut steps: Vec<Step> = Vec::new();
    for t in &plan.targets {
        let Some(expr) = solved.get(&t.identity) else { continue };
        let mut sources = t.sources.clone();
        let expr = wire_data(expr, data, &mut sources);
        steps.push(Step {
            identity: t.identity,
            sources,
            expr,
        });
    }
    let outputs = d.identities_of(ColumnKind::Output);
    let mut needed: BTreeSet<IdentityId> = outputs.iter().copied().collect();
    for step in steps.iter().rev() {
        if needed.contains(&step.identity) {
            needed.extend(step.sources.iter().copied());
        }
    }
    steps.retain(|s| needed.contains(&s.identity));
    let data = data
        .iter()
        .filter(|(id, _)| needed.contains(id))
        .cloned()
        .collect();
    Pipeline {
        name: d.name.clone(),
        inputs: d.identities_of(ColumnKind::Input),
        outputs,
        steps,
        data,
        imports: d.uses.clone(),
        catalog_version: CATALOG_VERSION.to_string(),
    }
}

/// Runs every fully filled case through the pipeline with test data and
/// checks that the outputs come back exactly.
fn replay(d: &Document, p: &Pipeline, imports: &dyn Imports) {
    if let Err(m) = verify_pipeline(d, p, imports) {
        panic!("{m}");
    }
}

/// Checks that a pipeline reproduces the outputs of every case of `d` whose
/// inputs and outputs are all filled.
pub fn verify_pipeline(d: &Document, p: &Pipeline, imports: &dyn Imports) -> Result<(), String> {
    let filled = |k: usize, ids: &[IdentityId]| -> Option<Vec<Value>> {
        ids.iter()
            .map(|id| d.element_in_case(k, *id).filter(|e| !e.is_empty()).map(|e| e.value.clone()))
            .collect()
    };
    for k in 0..d.cases.len() {
        let (Some(inputs), Some(outputs)) = (filled(k, &p.inputs), filled(k, &p.outputs)) else {
            continue;
        };
        let got = execute(p, &inputs, &p.data, imports);
        if got.as_ref().ok() != Some(&outputs) {
            return Err(format!("pipeline for {} does not replay case {}", d.name, d.cases[k].id));
        }
    }
    Ok(())
}
