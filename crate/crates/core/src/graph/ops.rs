use std::collections::{BTreeMap, BTreeSet};

use super::{
    CaseDiagram, Column, ColumnKind, Dependency, Document, Element, ElementId, GraphError,
    IdentityId, Shape,
};
use crate::value::Value;

/// Returns a copy of `d` with `case` cloned; see [`Document::clone_case`].
pub fn clone_case(d: &Document, case: &str) -> Result<Document, GraphError> {
    let mut out = d.clone();
    out.clone_case(case)?;
    Ok(out)
}

/// Returns a copy of `d` with identity `b` merged into `a`.
pub fn merge_identity(d: &Document, a: IdentityId, b: IdentityId) -> Result<Document, GraphError> {
    let mut out = d.clone();
    out.merge_identity(a, b)?;
    Ok(out)
}

/// Returns a copy of `d` where `members` have been moved to a fresh identity.
pub fn split_identity(
    d: &Document,
    class: IdentityId,
    members: &BTreeSet<ElementId>,
) -> Result<(Document, IdentityId), GraphError> {
    let mut out = d.clone();
    let id = out.split_identity(class, members)?;
    Ok((out, id))
}

/// Returns a copy of `d` with a runtime value bound to a data identity.
pub fn set_runtime_binding(
    d: &Document,
    identity: IdentityId,
    value: Value,
) -> Result<Document, GraphError> {
    let mut out = d.clone();
    out.set_runtime_binding(identity, value)?;
    Ok(out)
}

fn check_value(shape: Shape, value: &Value) -> Result<(), GraphError> {
    match shape.kind() {
        Some(kind) if value.kind() != kind => Err(GraphError::ShapeMismatch(format!(
            "a {kind} element cannot hold a {} value",
            value.kind()
        ))),
        Some(_) if !value.is_empty_marker() && value.contains_empty() => Err(
            GraphError::ShapeMismatch("placeholders cannot be nested inside values".into()),
        ),
        Some(_) => Ok(()),
        None if value.as_text().is_some() => Ok(()),
        None => Err(GraphError::ShapeMismatch(
            "comments and labels hold text only".into(),
        )),
    }
}

impl Document {
    /// Appends an empty case. Without an id, the next unused number is chosen.
    pub fn add_case(&mut self, id: Option<&str>) -> Result<String, GraphError> {
        let id = match id {
            Some(id) if self.cases.iter().any(|c| c.id == id) => {
                return Err(GraphError::DuplicateCase(id.to_string()))
            }
            Some(id) => id.to_string(),
            None => self.unused_case_id(),
        };
        self.cases.push(CaseDiagram::new(id.clone()));
        Ok(id)
    }

    fn unused_case_id(&self) -> String {
        let mut n = self.cases.len() + 1;
        while self.cases.iter().any(|c| c.id == n.to_string()) {
            n += 1;
        }
        n.to_string()
    }

    pub fn remove_case(&mut self, case: &str) -> Result<(), GraphError> {
        let idx = self.case_index(case)?;
        if self.cases.len() == 1 {
            return Err(GraphError::LastCase);
        }
        self.cases.remove(idx);
        self.drop_orphan_bindings();
        Ok(())
    }

    pub fn rename_case(&mut self, case: &str, new_id: &str) -> Result<(), GraphError> {
        let idx = self.case_index(case)?;
        if case != new_id && self.cases.iter().any(|c| c.id == new_id) {
            return Err(GraphError::DuplicateCase(new_id.to_string()));
        }
        self.cases[idx].id = new_id.to_string();
        Ok(())
    }

    /// Inserts an empty derive column at `column`, which must lie after the
    /// input column and no later than the output column.
    pub fn add_derive_column(&mut self, case: &str, column: usize) -> Result<(), GraphError> {
        let idx = self.case_index(case)?;
        let c = &mut self.cases[idx];
        if column < 2 || column > c.output_column() {
            return Err(GraphError::InvalidColumn(format!(
                "derive columns go between input and output, not at {column}"
            )));
        }
        c.columns.insert(column, Column::new(ColumnKind::Derive));
        Ok(())
    }

    /// Removes a derive column with its elements and their dependencies.
    pub fn remove_derive_column(&mut self, case: &str, column: usize) -> Result<(), GraphError> {
        let idx = self.case_index(case)?;
        let col = self.column(idx, column)?;
        if col.kind != ColumnKind::Derive {
            return Err(GraphError::InvalidColumn(format!(
                "column {column} is not a derive column"
            )));
        }
        let gone: BTreeSet<ElementId> = col.elements.iter().map(|e| e.id).collect();
        self.cases[idx].columns.remove(column);
        self.detach(idx, &gone);
        Ok(())
    }

    pub fn set_column_offset(&mut self, case: &str, column: usize, offset: i32) -> Result<(), GraphError> {
        let idx = self.case_index(case)?;
        self.column(idx, column)?;
        self.cases[idx].columns[column].offset = offset;
        Ok(())
    }

    fn column(&self, case_index: usize, column: usize) -> Result<&Column, GraphError> {
        self.cases[case_index]
            .columns
            .get(column)
            .ok_or_else(|| GraphError::UnknownColumn {
                case: self.cases[case_index].id.clone(),
                column,
            })
    }

    /// Appends a new element with a fresh identity to a column.
    pub fn add_element(
        &mut self,
        case: &str,
        column: usize,
        shape: Shape,
        value: Value,
    ) -> Result<ElementId, GraphError> {
        let idx = self.case_index(case)?;
        self.column(idx, column)?;
        check_value(shape, &value)?;
        let id = self.fresh_element();
        let identity = self.fresh_identity();
        self.cases[idx].columns[column].elements.push(Element {
            id,
            identity,
            shape,
            value,
            label_for: None,
        });
        Ok(id)
    }

    /// Removes an element, its dependencies as a target, and its place in
    /// other dependencies' source sets.
    pub fn remove_element(&mut self, id: ElementId) -> Result<(), GraphError> {
        let (k, c, e) = self.locate(id).ok_or(GraphError::UnknownElement(id))?;
        self.cases[k].columns[c].elements.remove(e);
        self.detach(k, &BTreeSet::from([id]));
        self.drop_orphan_bindings();
        Ok(())
    }

    fn detach(&mut self, case_index: usize, gone: &BTreeSet<ElementId>) {
        let case = &mut self.cases[case_index];
        case.dependencies.retain_mut(|dep| {
            dep.sources.retain(|s| !gone.contains(s));
            !gone.contains(&dep.target) && !dep.sources.is_empty()
        });
        dedup_dependencies(&mut case.dependencies);
        for col in &mut case.columns {
            for e in &mut col.elements {
                if e.label_for.is_some_and(|t| gone.contains(&t)) {
                    e.label_for = None;
                }
            }
        }
    }

    fn drop_orphan_bindings(&mut self) {
        let live: BTreeSet<IdentityId> = self.elements().map(|(_, e)| e.identity).collect();
        self.runtime.retain(|id, _| live.contains(id));
    }

    pub fn set_value(&mut self, id: ElementId, value: Value) -> Result<(), GraphError> {
        let e = self.element(id).ok_or(GraphError::UnknownElement(id))?;
        check_value(e.shape, &value)?;
        self.element_mut(id).expect("located").value = value;
        Ok(())
    }

    /// Moves an element to position `to` within its column.
    pub fn move_element(&mut self, id: ElementId, to: usize) -> Result<(), GraphError> {
        let (k, c, e) = self.locate(id).ok_or(GraphError::UnknownElement(id))?;
        let col = &mut self.cases[k].columns[c].elements;
        if to >= col.len() {
            return Err(GraphError::InvalidColumn(format!(
                "position {to} is past the end of the column"
            )));
        }
        let el = col.remove(e);
        col.insert(to, el);
        Ok(())
    }

    /// Attaches a label to an input or output element of the same case.
    pub fn set_label_target(&mut self, label: ElementId, target: Option<ElementId>) -> Result<(), GraphError> {
        let (k, _, _) = self.locate(label).ok_or(GraphError::UnknownElement(label))?;
        let case = &self.cases[k];
        let (_, l) = case.locate(label).expect("located");
        if l.shape != Shape::Label {
            return Err(GraphError::ShapeMismatch(format!("{label} is not a label")));
        }
        if let Some(t) = target {
            let (tc, te) = case.locate(t).ok_or(GraphError::UnknownElement(t))?;
            let kind = case.columns[tc].kind;
            if te.shape.is_annotation() || !matches!(kind, ColumnKind::Input | ColumnKind::Output) {
                return Err(GraphError::ShapeMismatch(
                    "labels attach to input or output elements".into(),
                ));
            }
        }
        self.element_mut(label).expect("located").label_for = target;
        Ok(())
    }

    /// Adds a dependency edge from `sources` to `target` within one case.
    pub fn add_dependency(
        &mut self,
        case: &str,
        sources: impl IntoIterator<Item = ElementId>,
        target: ElementId,
    ) -> Result<(), GraphError> {
        let idx = self.case_index(case)?;
        let sources: BTreeSet<ElementId> = sources.into_iter().collect();
        let dep = Dependency { sources, target };
        check_dependency(&self.cases[idx], &dep)?;
        if self.cases[idx].dependencies.contains(&dep) {
            return Err(GraphError::InvalidDependency("the dependency already exists".into()));
        }
        self.cases[idx].dependencies.push(dep);
        Ok(())
    }

    pub fn remove_dependency(
        &mut self,
        case: &str,
        sources: &BTreeSet<ElementId>,
        target: ElementId,
    ) -> Result<(), GraphError> {
        let idx = self.case_index(case)?;
        let deps = &mut self.cases[idx].dependencies;
        let pos = deps
            .iter()
            .position(|d| d.target == target && &d.sources == sources)
            .ok_or_else(|| GraphError::InvalidDependency("no such dependency".into()))?;
        deps.remove(pos);
        Ok(())
    }

    /// Appends a copy of `case` whose elements keep their identities but have
    /// no values. Comment and label text is kept. Returns the new case id.
    pub fn clone_case(&mut self, case: &str) -> Result<String, GraphError> {
        let idx = self.case_index(case)?;
        let source = self.cases[idx].clone();
        let new_id = self.unused_case_id();
        let mut map: BTreeMap<ElementId, ElementId> = BTreeMap::new();
        for e in source.elements() {
            let fresh = self.fresh_element();
            map.insert(e.id, fresh);
        }
        let columns = source
            .columns
            .iter()
            .map(|col| Column {
                kind: col.kind,
                offset: col.offset,
                elements: col
                    .elements
                    .iter()
                    .map(|e| Element {
                        id: map[&e.id],
                        identity: e.identity,
                        shape: e.shape,
                        value: match e.shape.kind() {
                            Some(kind) => Value::Empty(kind),
                            None => e.value.clone(),
                        },
                        label_for: e.label_for.map(|t| map[&t]),
                    })
                    .collect(),
            })
            .collect();
        let dependencies = source
            .dependencies
            .iter()
            .map(|d| Dependency {
                sources: d.sources.iter().map(|s| map[s]).collect(),
                target: map[&d.target],
            })
            .collect();
        self.cases.push(CaseDiagram {
            id: new_id.clone(),
            columns,
            dependencies,
        });
        Ok(new_id)
    }

    /// Makes every element of identity `b` part of identity `a`.
    pub fn merge_identity(&mut self, a: IdentityId, b: IdentityId) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SameIdentity);
        }
        let (shape_a, kind_a) = self.identity_info(a).ok_or(GraphError::UnknownIdentity(a))?;
        let (shape_b, kind_b) = self.identity_info(b).ok_or(GraphError::UnknownIdentity(b))?;
        if shape_a != shape_b || kind_a != kind_b {
            return Err(GraphError::ShapeMismatch(format!(
                "{a} is a {shape_a:?} in a {kind_a:?} column, {b} is a {shape_b:?} in a {kind_b:?} column"
            )));
        }
        if let Some(case) = self.cases.iter().find(|c| {
            c.column_of_identity(a).is_some() && c.column_of_identity(b).is_some()
        }) {
            return Err(GraphError::SameCaseConflict(a, b, case.id.clone()));
        }
        for case in &mut self.cases {
            for col in &mut case.columns {
                for e in &mut col.elements {
                    if e.identity == b {
                        e.identity = a;
                    }
                }
            }
        }
        if let Some(v) = self.runtime.remove(&b) {
            self.runtime.entry(a).or_insert(v);
        }
        Ok(())
    }

    /// Moves `members` out of identity `class` into a fresh identity.
    pub fn split_identity(
        &mut self,
        class: IdentityId,
        members: &BTreeSet<ElementId>,
    ) -> Result<IdentityId, GraphError> {
        let map = self.identity_map();
        let all = map.class(class).ok_or(GraphError::UnknownIdentity(class))?;
        if members.is_empty() || members.len() >= all.len() || !members.is_subset(all) {
            return Err(GraphError::NotProperSubset(class));
        }
        let fresh = self.fresh_identity();
        for m in members {
            self.element_mut(*m).expect("member of a class").identity = fresh;
        }
        Ok(fresh)
    }

    /// Binds a runtime value to a data identity. Test values are unchanged.
    pub fn set_runtime_binding(&mut self, identity: IdentityId, value: Value) -> Result<(), GraphError> {
        let (shape, kind) = self
            .identity_info(identity)
            .ok_or(GraphError::UnknownIdentity(identity))?;
        if kind != ColumnKind::Data || shape.is_annotation() {
            return Err(GraphError::NotDataElement(identity));
        }
        if value.is_empty_marker() {
            return Err(GraphError::ShapeMismatch("runtime values cannot be empty".into()));
        }
        check_value(shape, &value)?;
        self.runtime.insert(identity, value);
        Ok(())
    }

    pub fn clear_runtime_binding(&mut self, identity: IdentityId) -> Option<Value> {
        self.runtime.remove(&identity)
    }

    /// Replaces the list of imported programs.
    pub fn set_uses(&mut self, names: Vec<String>) -> Result<(), GraphError> {
        let distinct: BTreeSet<&String> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(GraphError::InvalidUses("imports must be distinct".into()));
        }
        if names.contains(&self.name) {
            return Err(GraphError::InvalidUses("a program cannot import itself".into()));
        }
        self.uses = names;
        Ok(())
    }
}

fn dedup_dependencies(deps: &mut Vec<Dependency>) {
    let mut seen = BTreeSet::new();
    deps.retain(|d| seen.insert(d.clone()));
}

/// The first column rule a dependency breaks, as a diagnostic code and message.
pub(crate) fn dependency_problem(case: &CaseDiagram, dep: &Dependency) -> Option<(&'static str, String)> {
    if dep.sources.is_empty() {
        return Some(("dependency-no-sources", "a dependency needs at least one source".into()));
    }
    let Some((tc, te)) = case.locate(dep.target) else {
        return Some((
            "dependency-unknown-element",
            format!("target {} is not in case `{}`", dep.target, case.id),
        ));
    };
    if te.shape.is_annotation() {
        return Some(("dependency-annotation", "dependencies cannot target comments or labels".into()));
    }
    if matches!(case.columns[tc].kind, ColumnKind::Data | ColumnKind::Input) {
        return Some((
            "dependency-target-column",
            "dependencies must target derive or output elements".into(),
        ));
    }
    for s in &dep.sources {
        let Some((sc, se)) = case.locate(*s) else {
            return Some((
                "dependency-unknown-element",
                format!("source {s} is not in case `{}`", case.id),
            ));
        };
        if se.shape.is_annotation() {
            return Some(("dependency-annotation", "dependencies cannot start at comments or labels".into()));
        }
        if sc >= tc {
            return Some((
                "right-to-left-dependency",
                format!("source {s} is not in a column to the left of target {}", dep.target),
            ));
        }
    }
    None
}

fn check_dependency(case: &CaseDiagram, dep: &Dependency) -> Result<(), GraphError> {
    match dependency_problem(case, dep) {
        Some((_, m)) => Err(GraphError::InvalidDependency(m)),
        None => Ok(()),
    }
}
