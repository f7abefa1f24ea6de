//! In-memory representation of Zoea data values.
//!
//! Every test case in a program is made of [`Value`]s: JSON-shaped data with
//! two additions that JSON itself cannot express. A [`Table`] is a rectangular
//! two dimensional array (serialized as an array of arrays, so the distinction
//! from a list of lists is carried by a shape hint), and [`Value::Empty`] is the
//! placeholder shown for an element that has not been given a value yet. The
//! placeholder is not data: it never compares equal to anything but another
//! placeholder of the same kind and it cannot be serialized as plain JSON.

mod json;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

pub(crate) use json::{parse_complete, parse_prefix, untag, write_string, write_value, Mode, WriteStyle};
pub use json::{from_json, from_tagged_json, to_json, to_tagged_json};

/// Errors raised while building, parsing or serializing values.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValueError {
    #[error("value contains an empty placeholder ({0})")]
    EmptyPresent(Kind),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("shape error: {0}")]
    Shape(String),
}

/// The four kinds of data element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Scalar,
    List,
    Table,
    Object,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Scalar => "scalar",
            Kind::List => "list",
            Kind::Table => "table",
            Kind::Object => "object",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scalar" => Ok(Kind::Scalar),
            "list" => Ok(Kind::List),
            "table" => Ok(Kind::Table),
            "object" => Ok(Kind::Object),
            other => Err(ValueError::Shape(format!("unknown kind `{other}`"))),
        }
    }
}

/// A decimal number that remembers how it was written.
///
/// Equality, ordering and hashing use the numeric value, so `1.0 == 1`.
/// Serialization uses the original lexical form.
#[derive(Clone)]
pub struct Number {
    value: Decimal,
    text: Box<str>,
}

impl Number {
    pub fn from_decimal(value: Decimal) -> Self {
        Number {
            text: value.to_string().into_boxed_str(),
            value,
        }
    }

    /// Parses a JSON number literal, keeping its lexical form.
    pub fn parse(lexical: &str) -> Option<Self> {
        if !is_json_number(lexical) {
            return None;
        }
        let value = if lexical.contains(['e', 'E']) {
            Decimal::from_scientific(lexical).ok()?
        } else {
            Decimal::from_str_exact(lexical).ok()?
        };
        Some(Number {
            value,
            text: lexical.into(),
        })
    }

    pub fn decimal(&self) -> Decimal {
        self.value
    }

    pub fn lexical(&self) -> &str {
        &self.text
    }

    /// Lexical form with the scale normalized, so numerically equal numbers print the same.
    pub fn canonical(&self) -> String {
        self.value.normalize().to_string()
    }

    /// The value as a non-negative index, if it is a whole number.
    pub fn as_index(&self) -> Option<usize> {
        if self.value.is_sign_negative() && !self.value.is_zero() {
            return None;
        }
        if !self.value.fract().is_zero() {
            return None;
        }
        self.value.trunc().to_usize()
    }
}

impl From<i64> for Number {
    fn from(v: i64) -> Self {
        Number::from_decimal(Decimal::from(v))
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl Eq for Number {}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.cmp(&other.value)
    }
}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let n = self.value.normalize();
        n.mantissa().hash(state);
        n.scale().hash(state);
    }
}

impl fmt::Debug for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub(crate) fn is_json_number(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if b.get(i) == Some(&b'-') {
        i += 1;
    }
    match b.get(i) {
        Some(b'0') => i += 1,
        Some(c) if c.is_ascii_digit() => {
            while b.get(i).is_some_and(u8::is_ascii_digit) {
                i += 1;
            }
        }
        _ => return false,
    }
    if b.get(i) == Some(&b'.') {
        i += 1;
        if !b.get(i).is_some_and(u8::is_ascii_digit) {
            return false;
        }
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        i += 1;
        if matches!(b.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        if !b.get(i).is_some_and(u8::is_ascii_digit) {
            return false;
        }
        while b.get(i).is_some_and(u8::is_ascii_digit) {
            i += 1;
        }
    }
    i == b.len()
}

/// A rectangular two dimensional array with at least one row and one column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Table {
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(rows: Vec<Vec<Value>>) -> Result<Self, ValueError> {
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| ValueError::Shape("a table needs at least one row".into()))?;
        if width == 0 {
            return Err(ValueError::Shape("a table needs at least one column".into()));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(ValueError::Shape(format!(
                "ragged table: row {i} has {} cells, expected {width}",
                row.len()
            )));
        }
        Ok(Table { rows })
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<Value>> {
        self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.rows[0].len()
    }
}

/// Ordered key/value pairs with unique keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Object {
    entries: Vec<(String, Value)>,
}

impl Object {
    pub fn new(entries: Vec<(String, Value)>) -> Result<Self, ValueError> {
        for (i, (k, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(other, _)| other == k) {
                return Err(ValueError::Shape(format!("duplicate object key `{k}`")));
            }
        }
        Ok(Object { entries })
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A Zoea datum.
///
/// `PartialEq` is structural deep equality: numbers compare numerically, text
/// compares code point by code point, and a table never equals a list of lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Null,
    Bool(bool),
    Number(Number),
    Text(String),
    List(Vec<Value>),
    Table(Table),
    Object(Object),
    /// Placeholder for an element without a value.
    Empty(Kind),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn int(n: i64) -> Value {
        Value::Number(Number::from(n))
    }

    pub fn number(d: Decimal) -> Value {
        Value::Number(Number::from_decimal(d))
    }

    pub fn list(items: impl IntoIterator<Item = Value>) -> Value {
        Value::List(items.into_iter().collect())
    }

    pub fn table(rows: Vec<Vec<Value>>) -> Result<Value, ValueError> {
        Table::new(rows).map(Value::Table)
    }

    pub fn object(entries: Vec<(String, Value)>) -> Result<Value, ValueError> {
        Object::new(entries).map(Value::Object)
    }

    pub fn kind(&self) -> Kind {
        match self {
            Value::Null | Value::Bool(_) | Value::Number(_) | Value::Text(_) => Kind::Scalar,
            Value::List(_) => Kind::List,
            Value::Table(_) => Kind::Table,
            Value::Object(_) => Kind::Object,
            Value::Empty(k) => *k,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self,
            Value::Null | Value::Bool(_) | Value::Number(_) | Value::Text(_)
        )
    }

    pub fn is_empty_marker(&self) -> bool {
        matches!(self, Value::Empty(_))
    }

    /// True if an empty placeholder is reachable anywhere inside this value.
    pub fn contains_empty(&self) -> bool {
        self.find_empty().is_some()
    }

    pub(crate) fn find_empty(&self) -> Option<Kind> {
        match self {
            Value::Empty(k) => Some(*k),
            Value::List(items) => items.iter().find_map(Value::find_empty),
            Value::Table(t) => t.rows.iter().flatten().find_map(Value::find_empty),
            Value::Object(o) => o.entries.iter().find_map(|(_, v)| v.find_empty()),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    /// Replaces every table (at any depth) with the equivalent list of lists.
    pub fn tables_as_lists(self) -> Value {
        match self {
            Value::Table(t) => Value::List(
                t.rows
                    .into_iter()
                    .map(|r| Value::List(r.into_iter().map(Value::tables_as_lists).collect()))
                    .collect(),
            ),
            Value::List(items) => Value::List(items.into_iter().map(Value::tables_as_lists).collect()),
            Value::Object(o) => Value::Object(Object {
                entries: o
                    .entries
                    .into_iter()
                    .map(|(k, v)| (k, v.tables_as_lists()))
                    .collect(),
            }),
            other => other,
        }
    }
}

/// Structural equality of two values; the free-function form of `==`.
pub fn deep_equal(a: &Value, b: &Value) -> bool {
    a == b
}

impl fmt::Display for Value {
    /// Compact JSON; empty placeholders render as `<empty kind>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_value(self, &mut out, WriteStyle::DISPLAY).map_err(|_| fmt::Error)?;
        f.write_str(&out)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}


/// Serde support uses the tagged JSON encoding, so it only round-trips
/// through JSON serializers.
impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = serde_json::value::RawValue::from_string(to_tagged_json(self, None))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Box::<serde_json::value::RawValue>::deserialize(d)?;
        from_tagged_json(raw.get(), None).map_err(serde::de::Error::custom)
    }
}
