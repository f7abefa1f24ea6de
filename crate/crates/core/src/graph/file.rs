//! The document file format: one JSON object per program.
//!
//! Element values are written in tagged JSON so that empty placeholders and
//! nested tables survive a round trip; a top-level table is written as plain
//! rows because the element shape already says it is a table.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::{
    CaseDiagram, Column, ColumnKind, Dependency, Document, Element, ElementId, GraphError,
    IdentityId, Shape,
};
use crate::value::{from_tagged_json, to_tagged_json, Kind, Value};

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Serialize, Deserialize)]
struct DocumentFile {
    format_version: String,
    name: String,
    #[serde(default)]
    uses: Vec<String>,
    cases: Vec<CaseFile>,
    identities: BTreeMap<String, Vec<ElementId>>,
    #[serde(default)]
    runtime: BTreeMap<String, Box<RawValue>>,
    #[serde(default)]
    next_ids: Option<NextIds>,
}

#[derive(Serialize, Deserialize)]
struct NextIds {
    element: u64,
    identity: u64,
}

#[derive(Serialize, Deserialize)]
struct CaseFile {
    id: String,
    columns: Vec<ColumnFile>,
    #[serde(default)]
    dependencies: Vec<DependencyFile>,
}

#[derive(Serialize, Deserialize)]
struct ColumnFile {
    kind: ColumnKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    offset: i32,
    elements: Vec<ElementFile>,
}

fn is_zero(n: &i32) -> bool {
    *n == 0
}

#[derive(Serialize, Deserialize)]
struct ElementFile {
    id: ElementId,
    identity: IdentityId,
    shape: Shape,
    value: Box<RawValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_for: Option<ElementId>,
}

#[derive(Serialize, Deserialize)]
struct DependencyFile {
    sources: Vec<ElementId>,
    target: ElementId,
}

fn format_err(m: impl std::fmt::Display) -> GraphError {
    GraphError::Format(m.to_string())
}

fn raw(text: String) -> Box<RawValue> {
    RawValue::from_string(text).expect("tagged writer emits valid JSON")
}

fn encode(value: &Value, hint: Option<Kind>) -> Box<RawValue> {
    raw(to_tagged_json(value, hint))
}

fn decode(raw: &RawValue, hint: Option<Kind>) -> Result<Value, GraphError> {
    from_tagged_json(raw.get(), hint).map_err(format_err)
}

impl Document {
    /// Serializes to the document file format (pretty-printed JSON).
    pub fn to_json(&self) -> String {
        let shape_of: BTreeMap<IdentityId, Shape> = self
            .elements()
            .map(|(_, e)| (e.identity, e.shape))
            .collect();
        let file = DocumentFile {
            format_version: FORMAT_VERSION.to_string(),
            name: self.name.clone(),
            uses: self.uses.clone(),
            cases: self
                .cases
                .iter()
                .map(|c| CaseFile {
                    id: c.id.clone(),
                    columns: c
                        .columns
                        .iter()
                        .map(|col| ColumnFile {
                            kind: col.kind,
                            offset: col.offset,
                            elements: col
                                .elements
                                .iter()
                                .map(|e| ElementFile {
                                    id: e.id,
                                    identity: e.identity,
                                    shape: e.shape,
                                    value: encode(&e.value, e.shape.kind()),
                                    label_for: e.label_for,
                                })
                                .collect(),
                        })
                        .collect(),
                    dependencies: c
                        .dependencies
                        .iter()
                        .map(|d| DependencyFile {
                            sources: d.sources.iter().copied().collect(),
                            target: d.target,
                        })
                        .collect(),
                })
                .collect(),
            identities: self
                .identity_map()
                .classes
                .into_iter()
                .map(|(id, members)| (id.0.to_string(), members.into_iter().collect()))
                .collect(),
            runtime: self
                .runtime
                .iter()
                .map(|(id, v)| {
                    let hint = shape_of.get(id).and_then(|s| s.kind());
                    (id.0.to_string(), encode(v, hint))
                })
                .collect(),
            next_ids: Some(NextIds {
                element: self.next_element,
                identity: self.next_identity,
            }),
        };
        serde_json::to_string_pretty(&file).expect("document serializes")
    }

    /// Parses the document file format. Rejects unknown major versions and
    /// identity tables that disagree with the elements.
    pub fn from_json(text: &str) -> Result<Document, GraphError> {
        let file: DocumentFile = serde_json::from_str(text).map_err(format_err)?;
        let major = file.format_version.split('.').next().unwrap_or("");
        if major != FORMAT_VERSION.split('.').next().unwrap_or("") {
            return Err(GraphError::UnsupportedVersion(file.format_version));
        }
        let mut cases = Vec::with_capacity(file.cases.len());
        for c in file.cases {
            let mut columns = Vec::with_capacity(c.columns.len());
            for col in c.columns {
                let mut elements = Vec::with_capacity(col.elements.len());
                for e in col.elements {
                    elements.push(Element {
                        id: e.id,
                        identity: e.identity,
                        shape: e.shape,
                        value: decode(&e.value, e.shape.kind())?,
                        label_for: e.label_for,
                    });
                }
                columns.push(Column {
                    kind: col.kind,
                    offset: col.offset,
                    elements,
                });
            }
            cases.push(CaseDiagram {
                id: c.id,
                columns,
                dependencies: c
                    .dependencies
                    .into_iter()
                    .map(|d| Dependency {
                        sources: d.sources.into_iter().collect(),
                        target: d.target,
                    })
                    .collect(),
            });
        }
        let mut doc = Document {
            name: file.name,
            uses: file.uses,
            cases,
            runtime: BTreeMap::new(),
            next_element: 0,
            next_identity: 0,
        };

        let derived = doc.identity_map().classes;
        let mut listed: BTreeMap<IdentityId, BTreeSet<ElementId>> = BTreeMap::new();
        for (k, members) in file.identities {
            let id: u64 = k.parse().map_err(|_| format_err(format!("bad identity key `{k}`")))?;
            listed.insert(IdentityId(id), members.into_iter().collect());
        }
        if listed != derived {
            return Err(format_err("identity table does not match the elements"));
        }

        let max_element = doc.elements().map(|(_, e)| e.id.0).max().unwrap_or(0);
        let max_identity = derived.keys().map(|i| i.0).max().unwrap_or(0);
        match file.next_ids {
            Some(n) if n.element <= max_element || n.identity <= max_identity => {
                return Err(format_err("id counters are behind allocated ids"));
            }
            Some(n) => {
                doc.next_element = n.element;
                doc.next_identity = n.identity;
            }
            None => {
                doc.next_element = max_element + 1;
                doc.next_identity = max_identity + 1;
            }
        }

        for (k, v) in file.runtime {
            let id: u64 = k.parse().map_err(|_| format_err(format!("bad identity key `{k}`")))?;
            let id = IdentityId(id);
            let hint = doc.identity_info(id).and_then(|(s, _)| s.kind());
            doc.runtime.insert(id, decode(&v, hint)?);
        }
        Ok(doc)
    }
}
