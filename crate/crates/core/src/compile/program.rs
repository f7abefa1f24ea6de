use std::sync::Arc;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::graph::{ColumnKind, Document, ElementId, GraphError, Shape};
use crate::synth::{Imports, SearchConfig};
use crate::text::{validate, ZoeaProgram};
use crate::value::Value;

use super::{compile_document, CompileError, CompileEvent, Compiled};

fn case_label(id: &Value) -> String {
    match id {
        Value::Text(s) => s.clone(),
        Value::Number(n) => n.lexical().to_string(),
        other => crate::value::to_json(other).unwrap_or_default(),
    }
}

fn invalid(code: &'static str, message: impl Into<String>) -> CompileError {
    CompileError::Invalid(vec![Diagnostic::error(code, message)])
}

fn graph(e: GraphError) -> CompileError {
    match e {
        GraphError::ValidationFailed(d) => CompileError::Invalid(d),
        other => invalid("program-structure", other.to_string()),
    }
}

/// Builds the document equivalent of a textual program: one input, one
/// element per derive step, one output, chained by dependencies. Program data
/// becomes a data element.
pub fn program_to_document(p: &ZoeaProgram) -> Result<Document, CompileError> {
    let diags = validate(p);
    if has_errors(&diags) {
        return Err(CompileError::Invalid(diags));
    }
    if let Some(d) = diags.iter().find(|d| d.code == "unequal-derive-counts") {
        return Err(invalid("unequal-derive-counts", d.message.clone()));
    }
    let first = &p.cases[0];
    let steps = first.derives.len();
    let mut d = Document::new(p.name.clone());
    d.set_uses(p.uses.clone()).map_err(graph)?;
    let label = case_label(&first.id);
    d.rename_case("1", &label).map_err(graph)?;
    if let Some(data) = &p.data {
        d.add_element(&label, 0, Shape::of_kind(data.kind()), data.clone())
            .map_err(graph)?;
    }
    for k in 0..steps {
        d.add_derive_column(&label, 2 + k).map_err(graph)?;
    }
    let values = |c: &crate::text::ZoeaCase| -> Vec<Value> {
        std::iter::once(c.input.clone())
            .chain(c.derives.iter().cloned())
            .chain(std::iter::once(c.output.clone()))
            .collect()
    };
    let mut chain: Vec<ElementId> = Vec::new();
    for (column, v) in values(first).into_iter().enumerate() {
        let id = d
            .add_element(&label, column + 1, Shape::of_kind(v.kind()), v)
            .map_err(graph)?;
        chain.push(id);
    }
    for pair in chain.windows(2) {
        d.add_dependency(&label, [pair[0]], pair[1]).map_err(graph)?;
    }

    for case in &p.cases[1..] {
        let label = case_label(&case.id);
        let fresh = d.clone_case(&case_label(&first.id)).map_err(graph)?;
        if fresh != label {
            d.rename_case(&fresh, &label).map_err(graph)?;
        }
        let k = d.case_index(&label).map_err(graph)?;
        let ids: Vec<(ElementId, Shape)> = d.cases[k]
            .columns
            .iter()
            .filter(|c| c.kind != ColumnKind::Data)
            .flat_map(|c| c.elements.iter().map(|e| (e.id, e.shape)))
            .collect();
        for ((id, shape), v) in ids.into_iter().zip(values(case)) {
            if shape.kind() != Some(v.kind()) {
                return Err(invalid(
                    "shape-mismatch",
                    format!("case {label} has a {} where case 1 has a {:?}", v.kind(), shape),
                ));
            }
            d.set_value(id, v).map_err(graph)?;
        }
    }
    Ok(d)
}

/// Compiles a textual program. Each step reads the previous one; program
/// data is available to every step as a constant.
pub fn compile_zoea_text(
    p: &ZoeaProgram,
    config: &SearchConfig,
    imports: Arc<dyn Imports>,
    sink: &mut dyn FnMut(&CompileEvent),
) -> Result<Compiled, CompileError> {
    let d = match program_to_document(p) {
        Ok(d) => d,
        Err(e) => {
            sink(&CompileEvent::Finished {
                result: super::Outcome::Failure,
                failed: Vec::new(),
            });
            return Err(e);
        }
    };
    compile_document(&d, config, imports, sink)
}
