#![allow(dead_code)]

use zoea_core::compile::{check_events, CompileEvent};
use zoea_core::graph::{Document, ElementId, Shape};
use zoea_core::value::Value;

pub fn days() -> Value {
    Value::list(["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"].map(Value::text))
}

/// The week-day classifier drawn as a visual document: the day list in the
/// data column, one input and one output, with a dependency from both to
/// the output, and one case per example row.
pub fn week_day() -> Document {
    let mut d = Document::new("is_week_day");
    let data = d.add_element("1", 0, Shape::List, days()).unwrap();
    let input = d.add_element("1", 1, Shape::Scalar, Value::text("thursday")).unwrap();
    let output = d.add_element("1", 2, Shape::Scalar, Value::text("weekday")).unwrap();
    d.add_dependency("1", [data, input], output).unwrap();
    for (i, o) in [("MONDAY", "weekday"), ("banana", "unrecognised"), ("", "unrecognised")] {
        fill_clone(&mut d, &[days(), Value::text(i), Value::text(o)]);
    }
    d
}

/// Clones case `1` and sets the new case's elements, in column order.
pub fn fill_clone(d: &mut Document, values: &[Value]) -> String {
    let case = d.clone_case("1").unwrap();
    let k = d.case_index(&case).unwrap();
    let ids: Vec<ElementId> = d.cases[k].elements().map(|e| e.id).collect();
    for (id, v) in ids.into_iter().zip(values) {
        d.set_value(id, v.clone()).unwrap();
    }
    case
}

/// A one-input program mapping each example `x` to `x + 1`.
pub fn inc(name: &str, examples: &[i64]) -> Document {
    let mut d = Document::new(name);
    d.add_element("1", 1, Shape::Scalar, Value::int(examples[0])).unwrap();
    d.add_element("1", 2, Shape::Scalar, Value::int(examples[0] + 1)).unwrap();
    for &x in &examples[1..] {
        fill_clone(&mut d, &[Value::int(x), Value::int(x + 1)]);
    }
    d
}

/// A program whose examples contradict each other.
pub fn contradictory(name: &str) -> Document {
    let mut d = Document::new(name);
    d.add_element("1", 1, Shape::Scalar, Value::int(1)).unwrap();
    d.add_element("1", 2, Shape::Scalar, Value::int(2)).unwrap();
    fill_clone(&mut d, &[Value::int(1), Value::int(3)]);
    d
}

/// Splits a server-sent event body into (event name, data) pairs.
pub fn parse_sse(body: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for block in body.split("\n\n") {
        let mut name = String::from("message");
        let mut data = Vec::new();
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                name = v.trim().to_string();
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push(v.strip_prefix(' ').unwrap_or(v).to_string());
            }
        }
        if !data.is_empty() {
            out.push((name, data.join("\n")));
        }
    }
    out
}

/// Decodes the compile events of an SSE body and checks the protocol.
pub fn compile_events(body: &str) -> Vec<CompileEvent> {
    let events: Vec<CompileEvent> = parse_sse(body)
        .into_iter()
        .map(|(name, data)| {
            let e: CompileEvent = serde_json::from_str(&data).unwrap();
            assert_eq!(name == "result", e.is_terminal(), "event name {name} for {data}");
            e
        })
        .collect();
    check_events(&events).unwrap();
    events
}
