//! Random compile-ready documents, and an independent reconstruction of
//! synthetic cases from the raw document file.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value as Json};
use zoea_core::graph::{validate_document, Document, ElementId, Shape};
use zoea_core::value::Value;

fn random_value(shape: Shape, rng: &mut StdRng) -> Value {
    let scalar = |rng: &mut StdRng| {
        if rng.gen_bool(0.7) {
            Value::int(rng.gen_range(-5..12))
        } else {
            Value::text(*["a", "B", "cd", ""].choose(rng).unwrap())
        }
    };
    match shape {
        Shape::List => {
            let n = rng.gen_range(0..3);
            Value::list((0..n).map(|_| scalar(rng)))
        }
        Shape::Table => Value::table(vec![vec![scalar(rng), scalar(rng)]]).unwrap(),
        _ => scalar(rng),
    }
}

fn random_shape(rng: &mut StdRng) -> Shape {
    *[Shape::Scalar, Shape::Scalar, Shape::Scalar, Shape::List, Shape::Table]
        .choose(rng)
        .unwrap()
}

/// A random document that passes validation. Some targets have dependencies,
/// some rely on the fallback; some cases leave targets empty; some identities
/// occur in one case only.
pub fn ready_document(rng: &mut StdRng) -> Document {
    loop {
        if let Some(d) = attempt(rng) {
            if validate_document(&d).iter().all(|x| !x.is_error()) {
                return d;
            }
        }
    }
}

fn attempt(rng: &mut StdRng) -> Option<Document> {
    let mut d = Document::new("random");
    let derives = rng.gen_range(0..=2);
    for k in 0..derives {
        d.add_derive_column("1", 2 + k).ok()?;
    }
    let output_col = 2 + derives;
    // (column, element)
    let mut placed: Vec<(usize, ElementId, Shape)> = Vec::new();
    let counts = [rng.gen_range(0..=2), rng.gen_range(1..=2)];
    for (col, n) in [(0usize, counts[0]), (1, counts[1])] {
        for _ in 0..n {
            let shape = random_shape(rng);
            let e = d.add_element("1", col, shape, random_value(shape, rng)).ok()?;
            placed.push((col, e, shape));
        }
    }
    for col in 2..=output_col {
        for _ in 0..rng.gen_range(1..=2) {
            let shape = random_shape(rng);
            let e = d.add_element("1", col, shape, random_value(shape, rng)).ok()?;
            if rng.gen_bool(0.6) {
                let earlier: Vec<ElementId> = placed.iter().filter(|p| p.0 < col).map(|p| p.1).collect();
                let n = rng.gen_range(1..=earlier.len().min(3));
                let sources: BTreeSet<ElementId> = earlier.choose_multiple(rng, n).copied().collect();
                d.add_dependency("1", sources, e).ok()?;
            }
            placed.push((col, e, shape));
        }
    }
    if rng.gen_bool(0.3) {
        d.add_element("1", 1, Shape::Comment, Value::text("note")).ok()?;
    }
    for _ in 0..rng.gen_range(0..=3) {
        let c = d.clone_case("1").ok()?;
        let k = d.case_index(&c).ok()?;
        let ids: Vec<(usize, ElementId, Shape)> = d.cases[k]
            .columns
            .iter()
            .enumerate()
            .flat_map(|(ci, col)| col.elements.iter().map(move |e| (ci, e.id, e.shape)))
            .collect();
        for (ci, id, shape) in ids {
            if shape.is_annotation() {
                continue;
            }
            let leave_empty = match ci {
                0 => rng.gen_bool(0.7),
                1 => false,
                _ => rng.gen_bool(0.15),
            };
            if !leave_empty {
                d.set_value(id, random_value(shape, rng)).ok()?;
            }
        }
        if rng.gen_bool(0.2) {
            let shape = random_shape(rng);
            d.add_element(&c, 1, shape, random_value(shape, rng)).ok()?;
        }
    }
    Some(d)
}

fn kind_rank(kind: &str) -> u8 {
    match kind {
        "data" => 0,
        "input" => 1,
        "derive" => 2,
        "output" => 3,
        other => panic!("unknown column kind {other}"),
    }
}

fn is_empty(v: &Json) -> bool {
    v.as_object().is_some_and(|o| o.contains_key("$empty"))
}

/// Synthetic cases rebuilt directly from the file JSON of a document.
pub fn synthetic_cases_from_file(text: &str) -> Json {
    let file: Json = serde_json::from_str(text).unwrap();
    let cases = file["cases"].as_array().unwrap();

    // identity -> (rank, derive column index, order in column)
    let mut position: BTreeMap<u64, (u8, usize, usize)> = BTreeMap::new();
    // (case index, identity) -> value
    let mut value: BTreeMap<(usize, u64), Json> = BTreeMap::new();
    let mut kind_of: BTreeMap<u64, u8> = BTreeMap::new();
    let mut element_identity: Vec<BTreeMap<u64, u64>> = Vec::new();
    for (k, case) in cases.iter().enumerate() {
        let mut ids = BTreeMap::new();
        for (ci, col) in case["columns"].as_array().unwrap().iter().enumerate() {
            let rank = kind_rank(col["kind"].as_str().unwrap());
            for (order, el) in col["elements"].as_array().unwrap().iter().enumerate() {
                let identity = el["identity"].as_u64().unwrap();
                ids.insert(el["id"].as_u64().unwrap(), identity);
                let shape = el["shape"].as_str().unwrap();
                if shape == "comment" || shape == "label" {
                    continue;
                }
                let column = if rank == 2 { ci } else { 0 };
                position.entry(identity).or_insert((rank, column, order));
                kind_of.entry(identity).or_insert(rank);
                let v = if shape == "table" && !is_empty(&el["value"]) {
                    json!({ "$table": el["value"] })
                } else {
                    el["value"].clone()
                };
                value.insert((k, identity), v);
            }
        }
        element_identity.push(ids);
    }

    let mut declared: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for (k, case) in cases.iter().enumerate() {
        for dep in case["dependencies"].as_array().unwrap() {
            let target = element_identity[k][&dep["target"].as_u64().unwrap()];
            let set = declared.entry(target).or_default();
            for s in dep["sources"].as_array().unwrap() {
                set.insert(element_identity[k][&s.as_u64().unwrap()]);
            }
        }
    }

    let data_value = |id: u64| -> Option<Json> {
        (0..cases.len()).find_map(|k| value.get(&(k, id)).filter(|v| !is_empty(v)).cloned())
    };
    let filled = |k: usize, id: u64| value.get(&(k, id)).filter(|v| !is_empty(v)).cloned();

    let mut ordered: Vec<u64> = position.keys().copied().collect();
    ordered.sort_by_key(|id| (position[id], *id));
    let mut out = Vec::new();
    for &target in &ordered {
        let rank = position[&target].0;
        if rank < 2 {
            continue;
        }
        let rows_at: Vec<usize> = (0..cases.len()).filter(|&k| filled(k, target).is_some()).collect();
        let sources: Vec<u64> = match declared.get(&target).filter(|s| !s.is_empty()) {
            Some(set) => ordered.iter().copied().filter(|id| set.contains(id)).collect(),
            None => ordered
                .iter()
                .copied()
                .filter(|id| {
                    let (r, c, _) = position[id];
                    (r, c) < (rank, position[&target].1)
                })
                .filter(|id| {
                    if kind_of[id] == 0 {
                        data_value(*id).is_some()
                    } else {
                        rows_at.iter().all(|&k| filled(k, *id).is_some())
                    }
                })
                .collect(),
        };
        let rows: Vec<Json> = rows_at
            .iter()
            .map(|&k| {
                let inputs: Vec<Json> = sources
                    .iter()
                    .map(|s| {
                        let v = if kind_of[s] == 0 { data_value(*s) } else { filled(k, *s) };
                        v.unwrap_or(Json::Null)
                    })
                    .collect();
                json!({
                    "case": cases[k]["id"],
                    "inputs": inputs,
                    "output": filled(k, target).unwrap(),
                })
            })
            .collect();
        out.push(json!({ "target": target, "sources": sources, "rows": rows }));
    }
    Json::Array(out)
}
