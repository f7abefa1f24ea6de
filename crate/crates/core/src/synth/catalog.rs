//! The primitive catalog available to the synthesizer.

use std::collections::HashSet;
use std::fmt;

use rust_decimal::Decimal;

use super::eval::ErrorKind;
use crate::value::{Number, Object, Table, Value};

/// Version tag recorded with every compiled program.
pub const CATALOG_VERSION: &str = "catalog-v1";

/// Argument and result types used by primitive signatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ty {
    Text,
    Number,
    Bool,
    Scalar,
    List,
    /// A table, or a rectangular non-empty list of non-empty lists.
    Grid,
    Object,
    /// Text, list, table or object.
    Container,
    Any,
}

impl Ty {
    pub(crate) const ALL: [Ty; 9] = [
        Ty::Text,
        Ty::Number,
        Ty::Bool,
        Ty::Scalar,
        Ty::List,
        Ty::Grid,
        Ty::Object,
        Ty::Container,
        Ty::Any,
    ];

    pub(crate) fn bit(self) -> u16 {
        1 << (self as u16)
    }

    pub fn accepts(self, v: &Value) -> bool {
        match self {
            Ty::Text => matches!(v, Value::Text(_)),
            Ty::Number => matches!(v, Value::Number(_)),
            Ty::Bool => matches!(v, Value::Bool(_)),
            Ty::Scalar => v.is_scalar(),
            Ty::List => matches!(v, Value::List(_)),
            Ty::Grid => grid_rows(v).is_some(),
            Ty::Object => matches!(v, Value::Object(_)),
            Ty::Container => matches!(
                v,
                Value::Text(_) | Value::List(_) | Value::Table(_) | Value::Object(_)
            ),
            Ty::Any => !v.is_empty_marker(),
        }
    }

    /// Bit set of every type that accepts all of `values`.
    pub(crate) fn mask_of(values: &[Value]) -> u16 {
        Ty::ALL
            .iter()
            .filter(|t| values.iter().all(|v| t.accepts(v)))
            .fold(0, |m, t| m | t.bit())
    }

    fn name(self) -> &'static str {
        match self {
            Ty::Text => "text",
            Ty::Number => "number",
            Ty::Bool => "bool",
            Ty::Scalar => "scalar",
            Ty::List => "list",
            Ty::Grid => "table",
            Ty::Object => "object",
            Ty::Container => "container",
            Ty::Any => "any",
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

macro_rules! prims {
    ($($variant:ident => $name:literal, [$($arg:ident),*] -> $ret:ident;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Prim {
            $($variant,)*
        }

        impl Prim {
            pub const ALL: &'static [Prim] = &[$(Prim::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Prim::$variant => $name,)*
                }
            }

            pub fn from_name(name: &str) -> Option<Prim> {
                match name {
                    $($name => Some(Prim::$variant),)*
                    _ => None,
                }
            }

            pub fn args(self) -> &'static [Ty] {
                match self {
                    $(Prim::$variant => &[$(Ty::$arg),*],)*
                }
            }

            pub fn result(self) -> Ty {
                match self {
                    $(Prim::$variant => Ty::$ret,)*
                }
            }
        }
    };
}

prims! {
    Lowercase => "lowercase", [Text] -> Text;
    Uppercase => "uppercase", [Text] -> Text;
    Trim => "trim", [Text] -> Text;
    Concat => "concat", [Text, Text] -> Text;
    Split => "split", [Text, Text] -> List;
    Join => "join", [List, Text] -> Text;
    StrLength => "str_length", [Text] -> Number;
    StrReverse => "str_reverse", [Text] -> Text;
    ToString => "to_string", [Scalar] -> Text;
    Head => "head", [List] -> Any;
    Last => "last", [List] -> Any;
    Length => "length", [List] -> Number;
    Reverse => "reverse", [List] -> List;
    SortAsc => "sort_asc", [List] -> List;
    Distinct => "distinct", [List] -> List;
    Member => "member", [List, Any] -> Bool;
    IndexOf => "index_of", [List, Any] -> Number;
    Nth => "nth", [List, Number] -> Any;
    Append => "append", [List, Any] -> List;
    Flatten => "flatten", [List] -> List;
    Add => "add", [Number, Number] -> Number;
    Sub => "sub", [Number, Number] -> Number;
    Mul => "mul", [Number, Number] -> Number;
    Div => "div", [Number, Number] -> Number;
    Mod => "mod", [Number, Number] -> Number;
    Neg => "neg", [Number] -> Number;
    Abs => "abs", [Number] -> Number;
    Min => "min", [Number, Number] -> Number;
    Max => "max", [Number, Number] -> Number;
    Eq => "eq", [Any, Any] -> Bool;
    Lt => "lt", [Number, Number] -> Bool;
    Gt => "gt", [Number, Number] -> Bool;
    IsEmpty => "is_empty", [Container] -> Bool;
    RowAt => "row_at", [Grid, Number] -> List;
    ColAt => "col_at", [Grid, Number] -> List;
    Transpose => "transpose", [Grid] -> Grid;
    RowCount => "row_count", [Grid] -> Number;
    ColCount => "col_count", [Grid] -> Number;
    Get => "get", [Object, Text] -> Any;
    Keys => "keys", [Object] -> List;
    Values => "values", [Object] -> List;
}

/// Catalog entry describing one primitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Primitive {
    pub prim: Prim,
    pub name: &'static str,
    pub arity: usize,
    pub args: &'static [Ty],
    pub result: Ty,
    pub cost: u32,
}

pub fn catalog_v1() -> Vec<Primitive> {
    Prim::ALL
        .iter()
        .map(|&p| Primitive {
            prim: p,
            name: p.name(),
            arity: p.arity(),
            args: p.args(),
            result: p.result(),
            cost: 1,
        })
        .collect()
}

type R = Result<Value, ErrorKind>;

fn num(d: Decimal) -> Value {
    Value::Number(Number::from_decimal(d.normalize()))
}

fn dec(v: &Value) -> Result<Decimal, ErrorKind> {
    match v {
        Value::Number(n) => Ok(n.decimal()),
        _ => Err(ErrorKind::TypeMismatch),
    }
}

fn text(v: &Value) -> Result<&str, ErrorKind> {
    v.as_text().ok_or(ErrorKind::TypeMismatch)
}

fn list(v: &Value) -> Result<&[Value], ErrorKind> {
    v.as_list().ok_or(ErrorKind::TypeMismatch)
}

fn index(v: &Value) -> Result<usize, ErrorKind> {
    match v {
        Value::Number(n) => n.as_index().ok_or(ErrorKind::IndexOutOfRange),
        _ => Err(ErrorKind::TypeMismatch),
    }
}

fn object(v: &Value) -> Result<&Object, ErrorKind> {
    match v {
        Value::Object(o) => Ok(o),
        _ => Err(ErrorKind::TypeMismatch),
    }
}

/// Rows of a table or of a rectangular non-empty list of non-empty lists.
pub(crate) fn grid_rows(v: &Value) -> Option<Vec<&[Value]>> {
    match v {
        Value::Table(t) => Some(t.rows().iter().map(Vec::as_slice).collect()),
        Value::List(rows) if !rows.is_empty() => {
            let rows: Vec<&[Value]> = rows.iter().map(Value::as_list).collect::<Option<_>>()?;
            let width = rows[0].len();
            (width > 0 && rows.iter().all(|r| r.len() == width)).then_some(rows)
        }
        _ => None,
    }
}

fn grid(v: &Value) -> Result<Vec<&[Value]>, ErrorKind> {
    grid_rows(v).ok_or(ErrorKind::TypeMismatch)
}

fn scalar_text(v: &Value) -> Result<String, ErrorKind> {
    match v {
        Value::Text(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.canonical()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Null => Ok("null".into()),
        _ => Err(ErrorKind::TypeMismatch),
    }
}

fn compare(a: &Value, b: &Value) -> Result<std::cmp::Ordering, ErrorKind> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Ok(x.cmp(y)),
        (Value::Text(x), Value::Text(y)) => Ok(x.cmp(y)),
        _ => Err(ErrorKind::TypeMismatch),
    }
}

fn arith(op: fn(Decimal, Decimal) -> Option<Decimal>, a: &Value, b: &Value) -> R {
    op(dec(a)?, dec(b)?).map(num).ok_or(ErrorKind::Overflow)
}

impl Prim {
    pub fn arity(self) -> usize {
        self.args().len()
    }

    /// Argument order does not matter.
    pub fn is_commutative(self) -> bool {
        matches!(self, Prim::Add | Prim::Mul | Prim::Min | Prim::Max | Prim::Eq)
    }

    /// Applies the primitive. `args.len()` must equal the arity.
    pub fn apply(self, args: &[&Value]) -> R {
        if args.len() != self.arity() {
            return Err(ErrorKind::Arity);
        }
        let a = args[0];
        match self {
            Prim::Lowercase => Ok(Value::text(text(a)?.to_lowercase())),
            Prim::Uppercase => Ok(Value::text(text(a)?.to_uppercase())),
            Prim::Trim => Ok(Value::text(text(a)?.trim())),
            Prim::Concat => Ok(Value::text(format!("{}{}", text(a)?, text(args[1])?))),
            Prim::Split => {
                let (s, sep) = (text(a)?, text(args[1])?);
                if sep.is_empty() {
                    Ok(Value::list(s.chars().map(|c| Value::text(c.to_string()))))
                } else {
                    Ok(Value::list(s.split(sep).map(Value::text)))
                }
            }
            Prim::Join => {
                let parts = list(a)?.iter().map(scalar_text).collect::<Result<Vec<_>, _>>()?;
                Ok(Value::text(parts.join(text(args[1])?)))
            }
            Prim::StrLength => Ok(num(Decimal::from(text(a)?.chars().count()))),
            Prim::StrReverse => Ok(Value::text(text(a)?.chars().rev().collect::<String>())),
            Prim::ToString => scalar_text(a).map(Value::Text),
            Prim::Head => list(a)?.first().cloned().ok_or(ErrorKind::IndexOutOfRange),
            Prim::Last => list(a)?.last().cloned().ok_or(ErrorKind::IndexOutOfRange),
            Prim::Length => Ok(num(Decimal::from(list(a)?.len()))),
            Prim::Reverse => Ok(Value::list(list(a)?.iter().rev().cloned())),
            Prim::SortAsc => {
                let items = list(a)?;
                let mut sorted = items.to_vec();
                let same_kind = items.iter().all(|v| matches!(v, Value::Number(_)))
                    || items.iter().all(|v| matches!(v, Value::Text(_)));
                if !same_kind {
                    return Err(ErrorKind::TypeMismatch);
                }
                sorted.sort_by(|x, y| compare(x, y).expect("checked kinds"));
                Ok(Value::List(sorted))
            }
            Prim::Distinct => {
                let mut seen = HashSet::new();
                Ok(Value::list(list(a)?.iter().filter(|v| seen.insert(*v)).cloned()))
            }
            Prim::Member => Ok(Value::Bool(list(a)?.contains(args[1]))),
            Prim::IndexOf => list(a)?
                .iter()
                .position(|v| v == args[1])
                .map(|i| num(Decimal::from(i)))
                .ok_or(ErrorKind::NotFound),
            Prim::Nth => {
                let items = list(a)?;
                let i = index(args[1])?;
                items.get(i).cloned().ok_or(ErrorKind::IndexOutOfRange)
            }
            Prim::Append => {
                let mut items = list(a)?.to_vec();
                items.push(args[1].clone());
                Ok(Value::List(items))
            }
            Prim::Flatten => {
                let mut out = Vec::new();
                for item in list(a)? {
                    match item {
                        Value::List(inner) => out.extend(inner.iter().cloned()),
                        other => out.push(other.clone()),
                    }
                }
                Ok(Value::List(out))
            }
            Prim::Add => arith(Decimal::checked_add, a, args[1]),
            Prim::Sub => arith(Decimal::checked_sub, a, args[1]),
            Prim::Mul => arith(Decimal::checked_mul, a, args[1]),
            Prim::Div | Prim::Mod => {
                let (x, y) = (dec(a)?, dec(args[1])?);
                if y.is_zero() {
                    return Err(ErrorKind::DivByZero);
                }
                let r = if self == Prim::Div { x.checked_div(y) } else { x.checked_rem(y) };
                r.map(num).ok_or(ErrorKind::Overflow)
            }
            Prim::Neg => Ok(num(-dec(a)?)),
            Prim::Abs => Ok(num(dec(a)?.abs())),
            Prim::Min => Ok(num(dec(a)?.min(dec(args[1])?))),
            Prim::Max => Ok(num(dec(a)?.max(dec(args[1])?))),
            Prim::Eq => Ok(Value::Bool(a == args[1])),
            Prim::Lt => Ok(Value::Bool(dec(a)? < dec(args[1])?)),
            Prim::Gt => Ok(Value::Bool(dec(a)? > dec(args[1])?)),
            Prim::IsEmpty => match a {
                Value::Text(s) => Ok(Value::Bool(s.is_empty())),
                Value::List(items) => Ok(Value::Bool(items.is_empty())),
                Value::Object(o) => Ok(Value::Bool(o.is_empty())),
                Value::Table(_) => Ok(Value::Bool(false)),
                _ => Err(ErrorKind::TypeMismatch),
            },
            Prim::RowAt => {
                let rows = grid(a)?;
                let i = index(args[1])?;
                rows.get(i)
                    .map(|r| Value::List(r.to_vec()))
                    .ok_or(ErrorKind::IndexOutOfRange)
            }
            Prim::ColAt => {
                let rows = grid(a)?;
                let j = index(args[1])?;
                if j >= rows[0].len() {
                    return Err(ErrorKind::IndexOutOfRange);
                }
                Ok(Value::list(rows.iter().map(|r| r[j].clone())))
            }
            Prim::Transpose => {
                let rows = grid(a)?;
                let cols: Vec<Vec<Value>> = (0..rows[0].len())
                    .map(|j| rows.iter().map(|r| r[j].clone()).collect())
                    .collect();
                match a {
                    Value::Table(_) => Ok(Value::Table(Table::new(cols).expect("rectangular"))),
                    _ => Ok(Value::list(cols.into_iter().map(Value::List))),
                }
            }
            Prim::RowCount => Ok(num(Decimal::from(grid(a)?.len()))),
            Prim::ColCount => Ok(num(Decimal::from(grid(a)?[0].len()))),
            Prim::Get => object(a)?
                .get(text(args[1])?)
                .cloned()
                .ok_or(ErrorKind::MissingKey),
            Prim::Keys => Ok(Value::list(
                object(a)?.entries().iter().map(|(k, _)| Value::text(k.clone())),
            )),
            Prim::Values => Ok(Value::list(
                object(a)?.entries().iter().map(|(_, v)| v.clone()),
            )),
        }
    }
}
