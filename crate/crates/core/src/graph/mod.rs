//! The visual program document.
//!
//! A [`Document`] holds one [`CaseDiagram`] per test case. Each diagram is a
//! row of columns (`data`, `input`, any number of `derive`, `output`) holding
//! [`Element`]s. Elements in different cases that stand for the same piece of
//! the program share an [`IdentityId`]; cloning a case preserves identities,
//! and identities can be merged and split afterwards. [`Dependency`] edges
//! record which earlier elements a derived or output element is computed from.
//!
//! Mutating methods are atomic: they check every precondition before touching
//! the document, so a failed call leaves it unchanged.

mod export;
mod file;
mod ops;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostic::Diagnostic;
use crate::value::{Kind, Value};

pub use export::export_to_zoea;
pub use file::FORMAT_VERSION;
pub use ops::{clone_case, merge_identity, set_runtime_binding, split_identity};
pub use validate::{is_structural, validate_document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdentityId(pub u64);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Scalar,
    List,
    Table,
    Object,
    Comment,
    Label,
}

impl Shape {
    /// The value kind of a data-bearing shape; `None` for comments and labels.
    pub fn kind(self) -> Option<Kind> {
        match self {
            Shape::Scalar => Some(Kind::Scalar),
            Shape::List => Some(Kind::List),
            Shape::Table => Some(Kind::Table),
            Shape::Object => Some(Kind::Object),
            Shape::Comment | Shape::Label => None,
        }
    }

    pub fn is_annotation(self) -> bool {
        matches!(self, Shape::Comment | Shape::Label)
    }

    pub fn of_kind(kind: Kind) -> Shape {
        match kind {
            Kind::Scalar => Shape::Scalar,
            Kind::List => Shape::List,
            Kind::Table => Shape::Table,
            Kind::Object => Shape::Object,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Data,
    Input,
    Derive,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub id: ElementId,
    pub identity: IdentityId,
    pub shape: Shape,
    /// The test value. Comments and labels hold their text as a text scalar.
    pub value: Value,
    /// For labels: the input or output element the label describes.
    pub label_for: Option<ElementId>,
}

impl Element {
    pub fn is_empty(&self) -> bool {
        self.value.is_empty_marker()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub kind: ColumnKind,
    /// Vertical layout shift; has no effect on meaning.
    pub offset: i32,
    pub elements: Vec<Element>,
}

impl Column {
    pub fn new(kind: ColumnKind) -> Self {
        Column {
            kind,
            offset: 0,
            elements: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dependency {
    pub sources: BTreeSet<ElementId>,
    pub target: ElementId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseDiagram {
    pub id: String,
    pub columns: Vec<Column>,
    pub dependencies: Vec<Dependency>,
}

impl CaseDiagram {
    pub fn new(id: impl Into<String>) -> Self {
        CaseDiagram {
            id: id.into(),
            columns: vec![
                Column::new(ColumnKind::Data),
                Column::new(ColumnKind::Input),
                Column::new(ColumnKind::Output),
            ],
            dependencies: Vec::new(),
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.columns.iter().flat_map(|c| c.elements.iter())
    }

    /// Column index and element for an element id in this case.
    pub fn locate(&self, id: ElementId) -> Option<(usize, &Element)> {
        self.columns.iter().enumerate().find_map(|(ci, c)| {
            c.elements.iter().find(|e| e.id == id).map(|e| (ci, e))
        })
    }

    pub fn column_of_identity(&self, identity: IdentityId) -> Option<(usize, &Element)> {
        self.columns.iter().enumerate().find_map(|(ci, c)| {
            c.elements.iter().find(|e| e.identity == identity).map(|e| (ci, e))
        })
    }

    pub fn output_column(&self) -> usize {
        self.columns.len() - 1
    }
}

/// A visual program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub name: String,
    pub uses: Vec<String>,
    pub cases: Vec<CaseDiagram>,
    /// Replacement values for data identities, used when the program runs.
    pub runtime: BTreeMap<IdentityId, Value>,
    next_element: u64,
    next_identity: u64,
}

/// Where an element lives: (case index, column index, position in column).
pub type Location = (usize, usize, usize);

/// The partition of elements into identity classes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdentityMap {
    pub classes: BTreeMap<IdentityId, BTreeSet<ElementId>>,
}

impl IdentityMap {
    pub fn class(&self, id: IdentityId) -> Option<&BTreeSet<ElementId>> {
        self.classes.get(&id)
    }

    /// The partition without identity ids, for comparing documents whose ids differ.
    pub fn partition(&self) -> BTreeSet<BTreeSet<ElementId>> {
        self.classes.values().cloned().collect()
    }
}

/// Column-major ordering key of an identity: its column kind, derive column
/// position, and vertical order in the first case where it appears.
pub type PositionKey = (ColumnKind, usize, usize, IdentityId);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown case `{0}`")]
    UnknownCase(String),
    #[error("case `{0}` already exists")]
    DuplicateCase(String),
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
    #[error("unknown identity {0}")]
    UnknownIdentity(IdentityId),
    #[error("case `{case}` has no column {column}")]
    UnknownColumn { case: String, column: usize },
    #[error("identities {0} and {1} both occur in case `{2}`")]
    SameCaseConflict(IdentityId, IdentityId, String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot merge an identity with itself")]
    SameIdentity,
    #[error("members must be a non-empty proper subset of identity {0}")]
    NotProperSubset(IdentityId),
    #[error("{0} is not a data-column identity")]
    NotDataElement(IdentityId),
    #[error("invalid dependency: {0}")]
    InvalidDependency(String),
    #[error("invalid column operation: {0}")]
    InvalidColumn(String),
    #[error("invalid imports: {0}")]
    InvalidUses(String),
    #[error("a document needs at least one case")]
    LastCase,
    #[error("document is not valid: {}", summarize(.0))]
    ValidationFailed(Vec<Diagnostic>),
    #[error("element {0} has no value")]
    EmptyValue(ElementId),
    #[error("unsupported document format version `{0}`")]
    UnsupportedVersion(String),
    #[error("malformed document: {0}")]
    Format(String),
}

fn summarize(diags: &[Diagnostic]) -> String {
    let errors: Vec<String> = diags.iter().filter(|d| d.is_error()).map(|d| d.to_string()).collect();
    errors.join("; ")
}

impl Document {
    /// A document with a single empty case `1`.
    pub fn new(name: impl Into<String>) -> Self {
        Document {
            name: name.into(),
            uses: Vec::new(),
            cases: vec![CaseDiagram::new("1")],
            runtime: BTreeMap::new(),
            next_element: 1,
            next_identity: 1,
        }
    }

    pub(crate) fn fresh_element(&mut self) -> ElementId {
        let id = ElementId(self.next_element);
        self.next_element += 1;
        id
    }

    pub(crate) fn fresh_identity(&mut self) -> IdentityId {
        let id = IdentityId(self.next_identity);
        self.next_identity += 1;
        id
    }

    pub(crate) fn counters(&self) -> (u64, u64) {
        (self.next_element, self.next_identity)
    }

    pub fn case_index(&self, case: &str) -> Result<usize, GraphError> {
        self.cases
            .iter()
            .position(|c| c.id == case)
            .ok_or_else(|| GraphError::UnknownCase(case.to_string()))
    }

    pub fn case(&self, case: &str) -> Result<&CaseDiagram, GraphError> {
        self.case_index(case).map(|i| &self.cases[i])
    }

    pub fn locate(&self, id: ElementId) -> Option<Location> {
        self.cases.iter().enumerate().find_map(|(ki, case)| {
            case.columns.iter().enumerate().find_map(|(ci, col)| {
                col.elements.iter().position(|e| e.id == id).map(|ei| (ki, ci, ei))
            })
        })
    }

    pub fn element(&self, id: ElementId) -> Option<&Element> {
        self.locate(id)
            .map(|(k, c, e)| &self.cases[k].columns[c].elements[e])
    }

    pub(crate) fn element_mut(&mut self, id: ElementId) -> Option<&mut Element> {
        let (k, c, e) = self.locate(id)?;
        Some(&mut self.cases[k].columns[c].elements[e])
    }

    pub fn elements(&self) -> impl Iterator<Item = (usize, &Element)> {
        self.cases
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.elements().map(move |e| (k, e)))
    }

    pub fn identity_map(&self) -> IdentityMap {
        let mut classes: BTreeMap<IdentityId, BTreeSet<ElementId>> = BTreeMap::new();
        for (_, e) in self.elements() {
            classes.entry(e.identity).or_default().insert(e.id);
        }
        IdentityMap { classes }
    }

    /// Shape and column kind of an identity, from its first element.
    pub fn identity_info(&self, identity: IdentityId) -> Option<(Shape, ColumnKind)> {
        self.cases.iter().find_map(|case| {
            case.column_of_identity(identity)
                .map(|(ci, e)| (e.shape, case.columns[ci].kind))
        })
    }

    pub fn position_key(&self, identity: IdentityId) -> Option<PositionKey> {
        self.cases.iter().find_map(|case| {
            case.columns.iter().enumerate().find_map(|(ci, col)| {
                col.elements.iter().position(|e| e.identity == identity).map(|order| {
                    let derive_index = if col.kind == ColumnKind::Derive { ci } else { 0 };
                    (col.kind, derive_index, order, identity)
                })
            })
        })
    }

    /// The element of `identity` in case `case_index`, if it occurs there.
    pub fn element_in_case(&self, case_index: usize, identity: IdentityId) -> Option<&Element> {
        self.cases[case_index]
            .column_of_identity(identity)
            .map(|(_, e)| e)
    }

    /// The test value of a data identity: its first non-empty value in case order.
    pub fn data_value(&self, identity: IdentityId) -> Option<&Value> {
        self.elements()
            .map(|(_, e)| e)
            .find(|e| e.identity == identity && !e.is_empty())
            .map(|e| &e.value)
    }

    /// The value a data identity takes when the program runs: its runtime
    /// binding if one is set, otherwise its test value.
    pub fn runtime_value(&self, identity: IdentityId) -> Option<&Value> {
        self.runtime.get(&identity).or_else(|| self.data_value(identity))
    }

    /// Dependency sources of each target identity, unioned across cases.
    pub fn identity_dependencies(&self) -> BTreeMap<IdentityId, BTreeSet<IdentityId>> {
        let mut out: BTreeMap<IdentityId, BTreeSet<IdentityId>> = BTreeMap::new();
        for case in &self.cases {
            for dep in &case.dependencies {
                let Some((_, target)) = case.locate(dep.target) else {
                    continue;
                };
                let entry = out.entry(target.identity).or_default();
                for s in &dep.sources {
                    if let Some((_, src)) = case.locate(*s) {
                        entry.insert(src.identity);
                    }
                }
            }
        }
        out
    }

    /// Identities of a column kind, ordered by column-major position.
    pub fn identities_of(&self, kind: ColumnKind) -> Vec<IdentityId> {
        let mut ids: Vec<PositionKey> = self
            .identity_map()
            .classes
            .keys()
            .filter_map(|&id| self.position_key(id))
            .filter(|k| k.0 == kind)
            .collect();
        ids.sort();
        let data_bearing = |id: &IdentityId| {
            self.identity_info(*id)
                .is_some_and(|(shape, _)| !shape.is_annotation())
        };
        ids.into_iter().map(|k| k.3).filter(data_bearing).collect()
    }

    /// The text of the first label attached to an element of `identity`.
    pub fn label_of(&self, identity: IdentityId) -> Option<String> {
        let members = self.identity_map().classes.remove(&identity)?;
        self.elements().find_map(|(_, e)| match (&e.shape, e.label_for, &e.value) {
            (Shape::Label, Some(target), Value::Text(t)) if members.contains(&target) => {
                Some(t.clone())
            }
            _ => None,
        })
    }
}
