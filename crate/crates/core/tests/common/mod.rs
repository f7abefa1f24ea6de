#![allow(dead_code)]

use proptest::prelude::*;
use rust_decimal::Decimal;
use zoea_core::value::{Number, Value};

pub fn arb_number() -> impl Strategy<Value = Value> {
    prop_oneof![
        (-999_999_999_999_999i64..=999_999_999_999_999).prop_map(Value::int),
        (-1_000_000i64..1_000_000, 0u32..6)
            .prop_map(|(m, scale)| Value::Number(Number::from_decimal(Decimal::new(m, scale)))),
    ]
}

pub fn arb_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z ]{0,8}",
        any::<String>(),
        Just("empty".to_string()),
        Just("case: 1".to_string()),
        Just("'\"#\\".to_string()),
    ]
}

pub fn arb_scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        arb_number(),
        arb_text().prop_map(Value::Text),
    ]
}

fn dedupe(entries: Vec<(String, Value)>) -> Value {
    let mut out: Vec<(String, Value)> = Vec::new();
    for (k, v) in entries {
        if !out.iter().any(|(o, _)| *o == k) {
            out.push((k, v));
        }
    }
    Value::object(out).unwrap()
}

/// Random values without tables or placeholders (the textual dialect cannot express them).
pub fn arb_plain_value() -> impl Strategy<Value = Value> {
    arb_scalar().prop_recursive(3, 24, 5, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::List),
            prop::collection::vec((arb_text(), inner), 0..4).prop_map(dedupe),
        ]
    })
}

/// Random values including tables (at any depth) but no placeholders.
pub fn arb_value() -> impl Strategy<Value = Value> {
    arb_scalar().prop_recursive(3, 24, 5, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::List),
            prop::collection::vec((arb_text(), inner.clone()), 0..4).prop_map(dedupe),
            (1usize..4, 1usize..4, prop::collection::vec(inner, 16)).prop_map(|(r, c, cells)| {
                let rows = (0..r).map(|i| cells[i * c..i * c + c].to_vec()).collect();
                Value::table(rows).unwrap()
            }),
        ]
    })
}
