use super::{validate_document, ColumnKind, Document, GraphError};
use crate::diagnostic::has_errors;
use crate::text::{ZoeaCase, ZoeaProgram};
use crate::value::{is_json_number, Number, Value};

/// Lowers a document to the textual dialect.
///
/// Inputs and outputs of each case become lists of their column values, each
/// derive element becomes one `derive:` step, and data values are emitted
/// once as a program-level list. Tables are written as lists of lists. Cases
/// whose input, derive and output elements are all empty are unfilled clones
/// and are skipped.
pub fn export_to_zoea(d: &Document) -> Result<ZoeaProgram, GraphError> {
    let diags = validate_document(d);
    if has_errors(&diags) {
        return Err(GraphError::ValidationFailed(diags));
    }

    let mut data = Vec::new();
    for id in d.identities_of(ColumnKind::Data) {
        match d.data_value(id) {
            Some(v) => data.push(v.clone().tables_as_lists()),
            None => {
                let first = d.elements().find(|(_, e)| e.identity == id).map(|(_, e)| e.id);
                return Err(GraphError::EmptyValue(first.expect("identity has elements")));
            }
        }
    }

    let mut cases = Vec::new();
    for case in &d.cases {
        let used: Vec<_> = case
            .columns
            .iter()
            .filter(|c| c.kind != ColumnKind::Data)
            .flat_map(|c| c.elements.iter().map(move |e| (c.kind, e)))
            .filter(|(_, e)| !e.shape.is_annotation())
            .collect();
        if used.iter().all(|(_, e)| e.is_empty()) {
            continue;
        }
        if let Some((_, e)) = used.iter().find(|(_, e)| e.is_empty()) {
            return Err(GraphError::EmptyValue(e.id));
        }
        let values = |kind: ColumnKind| -> Vec<Value> {
            used.iter()
                .filter(|(k, _)| *k == kind)
                .map(|(_, e)| e.value.clone().tables_as_lists())
                .collect()
        };
        cases.push(ZoeaCase {
            id: case_label(&case.id),
            input: Value::List(values(ColumnKind::Input)),
            derives: values(ColumnKind::Derive),
            output: Value::List(values(ColumnKind::Output)),
        });
    }

    Ok(ZoeaProgram {
        name: d.name.clone(),
        uses: d.uses.clone(),
        data: (!data.is_empty()).then_some(Value::List(data)),
        cases,
        comments: Vec::new(),
    })
}

fn case_label(id: &str) -> Value {
    if is_json_number(id) {
        if let Some(n) = Number::parse(id) {
            return Value::Number(n);
        }
    }
    Value::text(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{days, week_day};
    use crate::graph::Shape;

    #[test]
    fn week_day_exports_list_wrapped_cases() {
        let p = export_to_zoea(&week_day()).unwrap();
        assert_eq!(p.name, "is_week_day");
        assert_eq!(p.data, Some(Value::list([days()])));
        assert_eq!(p.cases.len(), 4);
        assert_eq!(p.cases[1].input, Value::list([Value::text("MONDAY")]));
        assert_eq!(p.cases[3].output, Value::list([Value::text("unrecognised")]));
        assert_eq!(p.cases[0].id, Value::int(1));
    }

    #[test]
    fn two_inputs_become_one_list() {
        let mut d = Document::new("pair");
        d.add_element("1", 1, Shape::Scalar, Value::int(3)).unwrap();
        d.add_element("1", 1, Shape::Scalar, Value::text("x")).unwrap();
        d.add_element("1", 2, Shape::Scalar, Value::int(7)).unwrap();
        let p = export_to_zoea(&d).unwrap();
        assert_eq!(p.cases[0].input, Value::list([Value::int(3), Value::text("x")]));
        assert_eq!(p.cases[0].output, Value::list([Value::int(7)]));
        assert_eq!(p.data, None);
    }

    #[test]
    fn derive_values_sit_between_input_and_output() {
        let mut d = Document::new("steps");
        d.add_derive_column("1", 2).unwrap();
        d.add_element("1", 1, Shape::Scalar, Value::int(1)).unwrap();
        d.add_element("1", 2, Shape::Scalar, Value::int(2)).unwrap();
        d.add_element("1", 3, Shape::Scalar, Value::int(3)).unwrap();
        d.add_derive_column("1", 3).unwrap();
        let p = export_to_zoea(&d).unwrap();
        assert_eq!(p.cases[0].derives, vec![Value::int(2)]);
        let text = crate::text::print(&p);
        let i = text.find("input:").unwrap();
        let m = text.find("derive:").unwrap();
        let o = text.find("output:").unwrap();
        assert!(i < m && m < o);
    }

    #[test]
    fn unfilled_clone_is_skipped_but_partial_one_is_an_error() {
        let mut d = week_day();
        let c = d.clone_case("1").unwrap();
        assert_eq!(export_to_zoea(&d).unwrap().cases.len(), 4);
        let idx = d.case_index(&c).unwrap();
        let input = d.cases[idx].columns[1].elements[0].id;
        d.set_value(input, Value::text("x")).unwrap();
        assert!(matches!(export_to_zoea(&d), Err(GraphError::EmptyValue(_))));
    }

    #[test]
    fn tables_are_lowered_to_lists() {
        let mut d = Document::new("t");
        let t = Value::table(vec![vec![Value::int(1)], vec![Value::int(2)]]).unwrap();
        d.add_element("1", 1, Shape::Table, t).unwrap();
        d.add_element("1", 2, Shape::Scalar, Value::int(2)).unwrap();
        let p = export_to_zoea(&d).unwrap();
        let rows = Value::list([Value::list([Value::int(1)]), Value::list([Value::int(2)])]);
        assert_eq!(p.cases[0].input, Value::list([rows]));
    }

    #[test]
    fn invalid_document_is_rejected() {
        let d = Document::new("nothing");
        assert!(matches!(export_to_zoea(&d), Err(GraphError::ValidationFailed(_))));
    }
}
