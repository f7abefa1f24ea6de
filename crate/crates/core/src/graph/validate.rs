use std::collections::{BTreeMap, BTreeSet};

use super::ops::dependency_problem;
use super::{ColumnKind, Document, ElementId, IdentityId, Shape};
use crate::diagnostic::Diagnostic;

/// Codes reported for documents that are well formed but not yet ready to
/// compile. Every other code marks a broken internal invariant.
const READINESS: &[&str] = &[
    "no-outputs",
    "no-examples",
    "missing-data-value",
    "data-value-conflict",
    "missing-source-value",
    "identity-cycle",
];

/// True if `code` reports a broken internal invariant rather than missing
/// or inconsistent user content.
pub fn is_structural(code: &str) -> bool {
    !READINESS.contains(&code)
}

/// All problems that stop `d` from compiling. Empty iff the document is ready.
pub fn validate_document(d: &Document) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    structure(d, &mut out);
    if out.is_empty() {
        readiness(d, &mut out);
    }
    out
}

fn at(d: &Document, id: ElementId) -> String {
    match d.locate(id) {
        Some((k, c, e)) => format!("case `{}` column {c} position {e} ({id})", d.cases[k].id),
        None => id.to_string(),
    }
}

fn structure(d: &Document, out: &mut Vec<Diagnostic>) {
    let err = |out: &mut Vec<Diagnostic>, code, msg: String| out.push(Diagnostic::error(code, msg));
    if d.name.trim().is_empty() {
        err(out, "empty-name", "the program has no name".into());
    }
    if d.cases.is_empty() {
        err(out, "no-cases", "the program has no cases".into());
    }
    let mut case_ids = BTreeSet::new();
    for case in &d.cases {
        if !case_ids.insert(case.id.as_str()) {
            err(out, "duplicate-case-id", format!("case id `{}` is used twice", case.id));
        }
        let kinds: Vec<ColumnKind> = case.columns.iter().map(|c| c.kind).collect();
        let layout_ok = kinds.len() >= 3
            && kinds[0] == ColumnKind::Data
            && kinds[1] == ColumnKind::Input
            && kinds[kinds.len() - 1] == ColumnKind::Output
            && kinds[2..kinds.len() - 1].iter().all(|k| *k == ColumnKind::Derive);
        if !layout_ok {
            err(
                out,
                "column-layout",
                format!("case `{}` columns must be data, input, derive..., output", case.id),
            );
        }
    }

    let (next_element, next_identity) = d.counters();
    let mut element_ids = BTreeSet::new();
    let mut identity_seen: BTreeMap<IdentityId, (Shape, ColumnKind, usize)> = BTreeMap::new();
    for (k, case) in d.cases.iter().enumerate() {
        let mut in_case = BTreeSet::new();
        for col in &case.columns {
            for e in &col.elements {
                if !element_ids.insert(e.id) {
                    err(out, "duplicate-element-id", format!("{} is used twice", e.id));
                }
                if e.id.0 >= next_element || e.identity.0 >= next_identity {
                    err(out, "id-counter", format!("{} was allocated past the counters", e.id));
                }
                if !in_case.insert(e.identity) {
                    err(
                        out,
                        "identity-repeated-in-case",
                        format!("identity {} occurs twice in case `{}`", e.identity, case.id),
                    );
                }
                match identity_seen.get(&e.identity) {
                    Some(&(shape, kind, first)) if shape != e.shape || kind != col.kind => err(
                        out,
                        "identity-shape-mismatch",
                        format!(
                            "identity {} is a {shape:?} in a {kind:?} column in case `{}` but {} is a {:?} in a {:?} column",
                            e.identity, d.cases[first].id, e.id, e.shape, col.kind
                        ),
                    ),
                    Some(_) => {}
                    None => {
                        identity_seen.insert(e.identity, (e.shape, col.kind, k));
                    }
                }
                check_element_value(d, e, out);
                if let Some(t) = e.label_for {
                    let ok = e.shape == Shape::Label
                        && case.locate(t).is_some_and(|(tc, te)| {
                            !te.shape.is_annotation()
                                && matches!(case.columns[tc].kind, ColumnKind::Input | ColumnKind::Output)
                        });
                    if !ok {
                        err(out, "label-target", format!("{} is not attached to an input or output element of its case", at(d, e.id)));
                    }
                }
            }
        }
        let mut deps = BTreeSet::new();
        for dep in &case.dependencies {
            if let Some((code, m)) = dependency_problem(case, dep) {
                err(out, code, format!("case `{}`: {m}", case.id));
            }
            if !deps.insert(dep) {
                err(out, "duplicate-dependency", format!("case `{}` repeats a dependency on {}", case.id, dep.target));
            }
        }
    }

    for (id, v) in &d.runtime {
        match d.identity_info(*id) {
            Some((shape, ColumnKind::Data)) if !shape.is_annotation() => {
                if Some(v.kind()) != shape.kind() || v.contains_empty() {
                    err(out, "runtime-binding-value", format!("runtime value of {id} does not fit its element"));
                }
            }
            _ => err(out, "runtime-binding-target", format!("runtime value bound to {id}, which is not data")),
        }
    }

    let mut uses = BTreeSet::new();
    for u in &d.uses {
        if !uses.insert(u) {
            err(out, "duplicate-use", format!("`{u}` is imported twice"));
        }
        if *u == d.name {
            err(out, "self-use", "a program cannot import itself".into());
        }
    }
}

fn check_element_value(d: &Document, e: &super::Element, out: &mut Vec<Diagnostic>) {
    let ok = match e.shape.kind() {
        Some(kind) => {
            e.value.kind() == kind && (e.value.is_empty_marker() || !e.value.contains_empty())
        }
        None => e.value.as_text().is_some(),
    };
    if !ok {
        out.push(Diagnostic::error(
            "value-shape-mismatch",
            format!("{} holds a value that does not fit its {:?} shape", at(d, e.id), e.shape),
        ));
    }
}

fn readiness(d: &Document, out: &mut Vec<Diagnostic>) {
    let err = |out: &mut Vec<Diagnostic>, code, msg: String| out.push(Diagnostic::error(code, msg));
    let outputs = d.identities_of(ColumnKind::Output);
    if outputs.is_empty() {
        err(out, "no-outputs", "the program has no output elements".into());
    }

    for id in d.identities_of(ColumnKind::Data) {
        let values: Vec<_> = d
            .elements()
            .map(|(_, e)| e)
            .filter(|e| e.identity == id && !e.is_empty())
            .collect();
        match values.first() {
            None => err(out, "missing-data-value", format!("data element {id} has no value in any case")),
            Some(first) => {
                if let Some(other) = values.iter().find(|e| e.value != first.value) {
                    err(
                        out,
                        "data-value-conflict",
                        format!("{} and {} share an identity but hold different data", at(d, first.id), at(d, other.id)),
                    );
                }
            }
        }
    }

    let targets: Vec<IdentityId> = d
        .identities_of(ColumnKind::Derive)
        .into_iter()
        .chain(outputs.iter().copied())
        .collect();
    for id in &targets {
        let has_example = d
            .elements()
            .any(|(_, e)| e.identity == *id && !e.is_empty());
        if !has_example {
            err(out, "no-examples", format!("{id} has no value in any case"));
        }
    }

    let deps = d.identity_dependencies();
    for (target, sources) in &deps {
        for (k, case) in d.cases.iter().enumerate() {
            let Some(t) = d.element_in_case(k, *target) else { continue };
            if t.is_empty() {
                continue;
            }
            for s in sources {
                let present = match d.element_in_case(k, *s) {
                    Some(e) if !e.is_empty() => true,
                    _ => matches!(d.identity_info(*s), Some((_, ColumnKind::Data)))
                        && d.data_value(*s).is_some(),
                };
                if !present {
                    err(
                        out,
                        "missing-source-value",
                        format!("{} needs a value for source {s} in case `{}`", at(d, t.id), case.id),
                    );
                }
            }
        }
    }

    if let Some(cycle) = find_cycle(&deps) {
        let path: Vec<String> = cycle.iter().map(ToString::to_string).collect();
        err(out, "identity-cycle", format!("dependencies form a cycle through {}", path.join(" -> ")));
    }
}

/// A cycle in the identity-level dependency graph, if any.
pub(crate) fn find_cycle(deps: &BTreeMap<IdentityId, BTreeSet<IdentityId>>) -> Option<Vec<IdentityId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    fn visit(
        n: IdentityId,
        deps: &BTreeMap<IdentityId, BTreeSet<IdentityId>>,
        marks: &mut BTreeMap<IdentityId, Mark>,
        stack: &mut Vec<IdentityId>,
    ) -> Option<Vec<IdentityId>> {
        match marks.get(&n) {
            Some(Mark::Done) => return None,
            Some(Mark::Open) => {
                let start = stack.iter().position(|x| *x == n).unwrap_or(0);
                let mut cycle = stack[start..].to_vec();
                cycle.push(n);
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(n, Mark::Open);
        stack.push(n);
        for s in deps.get(&n).into_iter().flatten() {
            if let Some(c) = visit(*s, deps, marks, stack) {
                return Some(c);
            }
        }
        stack.pop();
        marks.insert(n, Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for n in deps.keys() {
        let mut stack = Vec::new();
        if let Some(c) = visit(*n, deps, &mut marks, &mut stack) {
            return Some(c);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::week_day;
    use crate::graph::{Dependency, Shape};
    use crate::value::{Kind, Value};

    fn codes(d: &Document) -> Vec<&'static str> {
        validate_document(d).into_iter().map(|x| x.code).collect()
    }

    #[test]
    fn week_day_is_ready() {
        assert!(validate_document(&week_day()).is_empty());
    }

    #[test]
    fn right_to_left_dependency_is_reported() {
        let mut d = Document::new("p");
        d.add_derive_column("1", 2).unwrap();
        let m = d.add_element("1", 2, Shape::Scalar, Value::int(2)).unwrap();
        let o = d.add_element("1", 3, Shape::Scalar, Value::int(3)).unwrap();
        d.cases[0].dependencies.push(Dependency { sources: [o].into(), target: m });
        assert_eq!(codes(&d), vec!["right-to-left-dependency"]);
    }

    #[test]
    fn dependency_on_comment_is_reported() {
        let mut d = Document::new("p");
        let i = d.add_element("1", 1, Shape::Scalar, Value::int(1)).unwrap();
        let c = d.add_element("1", 2, Shape::Comment, Value::text("x")).unwrap();
        d.cases[0].dependencies.push(Dependency { sources: [i].into(), target: c });
        assert_eq!(codes(&d), vec!["dependency-annotation"]);
    }

    #[test]
    fn readiness_problems() {
        let mut d = week_day();
        let out = d.cases[2].columns[2].elements[0].id;
        let input = d.cases[2].columns[1].elements[0].id;
        d.set_value(input, Value::Empty(Kind::Scalar)).unwrap();
        assert_eq!(codes(&d), vec!["missing-source-value"]);
        d.set_value(out, Value::Empty(Kind::Scalar)).unwrap();
        assert!(codes(&d).is_empty());

        let data = d.cases[1].columns[0].elements[0].id;
        d.set_value(data, Value::list([Value::text("x")])).unwrap();
        assert_eq!(codes(&d), vec!["data-value-conflict"]);
        assert!(codes(&d).iter().all(|c| !is_structural(c)));
    }

    #[test]
    fn document_without_outputs() {
        let d = Document::new("p");
        assert_eq!(codes(&d), vec!["no-outputs"]);
    }

    #[test]
    fn identity_cycle_across_cases() {
        let mut d = Document::new("p");
        d.add_derive_column("1", 2).unwrap();
        d.add_derive_column("1", 3).unwrap();
        let a = d.add_element("1", 2, Shape::Scalar, Value::int(1)).unwrap();
        let b = d.add_element("1", 3, Shape::Scalar, Value::int(2)).unwrap();
        d.add_element("1", 4, Shape::Scalar, Value::int(3)).unwrap();
        d.add_dependency("1", [a], b).unwrap();
        d.add_case(Some("2")).unwrap();
        d.add_derive_column("2", 2).unwrap();
        d.add_derive_column("2", 3).unwrap();
        let b2 = d.add_element("2", 2, Shape::Scalar, Value::int(2)).unwrap();
        let a2 = d.add_element("2", 3, Shape::Scalar, Value::int(1)).unwrap();
        d.add_dependency("2", [b2], a2).unwrap();
        let ia = d.element(a).unwrap().identity;
        let ib = d.element(b).unwrap().identity;
        d.merge_identity(ia, d.element(a2).unwrap().identity).unwrap();
        d.merge_identity(ib, d.element(b2).unwrap().identity).unwrap();
        assert!(codes(&d).contains(&"identity-cycle"));
    }
}
