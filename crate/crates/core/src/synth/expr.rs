//! Synthesized expressions and their canonical text form.
//!
//! ```text
//! (in 0)                      input 0
//! (const "weekday")           constant, JSON with normalized numbers
//! (slot)                      the element bound by an enclosing map
//! (prim add (in 0) (const 1)) primitive application
//! (if P T E)                  conditional
//! (call "inc" (in 0))         imported program
//! (map L B)                   apply B to every element of list L
//! ```
//!
//! Every canonical form is a balanced s-expression, so no form is a proper
//! prefix of another. Replacing a subterm with a lexicographically smaller
//! one therefore yields a lexicographically smaller whole.

use std::fmt;

use super::catalog::Prim;
use crate::value::{parse_prefix, untag, write_string, write_value, Mode, Value, WriteStyle};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Input(usize),
    Const(Value),
    Slot,
    Apply(Prim, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    CallImport(String, Vec<Expr>),
    MapOver(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad expression at offset {offset}: {message}")]
pub struct ExprParseError {
    pub offset: usize,
    pub message: String,
}

impl Expr {
    pub fn apply(p: Prim, args: Vec<Expr>) -> Expr {
        Expr::Apply(p, args)
    }

    pub fn if_(p: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(p), Box::new(t), Box::new(e))
    }

    pub fn map(list: Expr, body: Expr) -> Expr {
        Expr::MapOver(Box::new(list), Box::new(body))
    }

    /// Node count, with conditionals and maps weighted 2.
    pub fn cost(&self) -> u32 {
        match self {
            Expr::Input(_) | Expr::Const(_) | Expr::Slot => 1,
            Expr::Apply(_, args) | Expr::CallImport(_, args) => {
                1 + args.iter().map(Expr::cost).sum::<u32>()
            }
            Expr::If(p, t, e) => 2 + p.cost() + t.cost() + e.cost(),
            Expr::MapOver(l, b) => 2 + l.cost() + b.cost(),
        }
    }

    pub fn canonical(&self) -> String {
        let mut out = String::new();
        self.write(&mut out);
        out
    }

    fn write(&self, out: &mut String) {
        match self {
            Expr::Input(i) => {
                out.push_str("(in ");
                out.push_str(&i.to_string());
                out.push(')');
            }
            Expr::Const(v) => {
                out.push_str("(const ");
                write_value(v, out, WriteStyle::CANONICAL).expect("tagged encoding is total");
                out.push(')');
            }
            Expr::Slot => out.push_str("(slot)"),
            Expr::Apply(p, args) => {
                out.push_str("(prim ");
                out.push_str(p.name());
                write_args(args, out);
            }
            Expr::If(p, t, e) => {
                out.push_str("(if");
                for x in [p, t, e] {
                    out.push(' ');
                    x.write(out);
                }
                out.push(')');
            }
            Expr::CallImport(name, args) => {
                out.push_str("(call ");
                write_string(name, out);
                write_args(args, out);
            }
            Expr::MapOver(l, b) => {
                out.push_str("(map ");
                l.write(out);
                out.push(' ');
                b.write(out);
                out.push(')');
            }
        }
    }

    /// Parses a canonical form (extra whitespace between tokens is allowed).
    pub fn parse(src: &str) -> Result<Expr, ExprParseError> {
        let mut p = Reader { src, pos: 0 };
        let e = p.expr(0)?;
        p.ws();
        if p.pos != src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    /// Whether the expression mentions the map slot outside any nested map body.
    pub fn uses_slot(&self) -> bool {
        match self {
            Expr::Slot => true,
            Expr::Input(_) | Expr::Const(_) => false,
            Expr::Apply(_, args) | Expr::CallImport(_, args) => args.iter().any(Expr::uses_slot),
            Expr::If(p, t, e) => p.uses_slot() || t.uses_slot() || e.uses_slot(),
            Expr::MapOver(l, _) => l.uses_slot(),
        }
    }
}

fn write_args(args: &[Expr], out: &mut String) {
    for a in args {
        out.push(' ');
        a.write(out);
    }
    out.push(')');
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Serialized as its canonical text.
impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical())
    }
}

impl<'de> serde::Deserialize<'de> for Expr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Expr::parse(&text).map_err(serde::de::Error::custom)
    }
}

const MAX_DEPTH: usize = 200;

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, m: &str) -> ExprParseError {
        ExprParseError {
            offset: self.pos,
            message: m.to_string(),
        }
    }

    fn ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, c: char) -> Result<(), ExprParseError> {
        self.ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn word(&mut self) -> &str {
        self.ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn peek_close(&mut self) -> bool {
        self.ws();
        self.src[self.pos..].starts_with(')')
    }

    fn json(&mut self) -> Result<Value, ExprParseError> {
        self.ws();
        let (v, used) = parse_prefix(&self.src[self.pos..], Mode::Strict)
            .map_err(|e| self.err(&e.to_string()))?;
        self.pos += used;
        untag(v).map_err(|e| self.err(&e.to_string()))
    }

    fn args(&mut self, depth: usize) -> Result<Vec<Expr>, ExprParseError> {
        let mut args = Vec::new();
        while !self.peek_close() {
            if self.pos >= self.src.len() {
                return Err(self.err("unexpected end"));
            }
            args.push(self.expr(depth + 1)?);
        }
        Ok(args)
    }

    fn expr(&mut self, depth: usize) -> Result<Expr, ExprParseError> {
        if depth > MAX_DEPTH {
            return Err(self.err("expression nested too deeply"));
        }
        self.eat('(')?;
        let head = self.word().to_string();
        let e = match head.as_str() {
            "in" => {
                let n = self.word();
                let i = n.parse().map_err(|_| self.err("expected an input index"))?;
                Expr::Input(i)
            }
            "const" => Expr::Const(self.json()?),
            "slot" => Expr::Slot,
            "prim" => {
                let name = self.word().to_string();
                let p = Prim::from_name(&name).ok_or_else(|| self.err("unknown primitive"))?;
                let args = self.args(depth)?;
                if args.len() != p.arity() {
                    return Err(self.err("wrong number of arguments"));
                }
                Expr::Apply(p, args)
            }
            "if" => {
                let p = self.expr(depth + 1)?;
                let t = self.expr(depth + 1)?;
                let e = self.expr(depth + 1)?;
                Expr::if_(p, t, e)
            }
            "call" => {
                let name = match self.json()? {
                    Value::Text(s) => s,
                    _ => return Err(self.err("expected a program name")),
                };
                Expr::CallImport(name, self.args(depth)?)
            }
            "map" => {
                let l = self.expr(depth + 1)?;
                let b = self.expr(depth + 1)?;
                Expr::map(l, b)
            }
            _ => return Err(self.err("unknown expression form")),
        };
        self.eat(')')?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_forms() {
        assert_eq!(Expr::Const(Value::int(1)).canonical(), "(const 1)");
        assert_eq!(Expr::Input(0).canonical(), "(in 0)");
        assert_eq!(Expr::Slot.canonical(), "(slot)");
    }

    #[test]
    fn numbers_are_normalized() {
        let e = Expr::Const(Value::Number(crate::value::Number::parse("1.50").unwrap()));
        assert_eq!(e.canonical(), "(const 1.5)");
    }

    #[test]
    fn nested_round_trip() {
        let days = Value::list([Value::text("monday"), Value::text("tuesday")]);
        let e = Expr::if_(
            Expr::apply(
                Prim::Member,
                vec![Expr::Const(days), Expr::apply(Prim::Lowercase, vec![Expr::Input(0)])],
            ),
            Expr::Const(Value::text("weekday")),
            Expr::Const(Value::text("unrecognised")),
        );
        let text = e.canonical();
        assert_eq!(
            text,
            r#"(if (prim member (const ["monday","tuesday"]) (prim lowercase (in 0))) (const "weekday") (const "unrecognised"))"#
        );
        assert_eq!(Expr::parse(&text).unwrap(), e);
        assert_eq!(e.cost(), 8);
    }

    #[test]
    fn map_and_call() {
        let e = Expr::map(
            Expr::Input(0),
            Expr::CallImport("inc".into(), vec![Expr::Slot]),
        );
        assert_eq!(e.canonical(), r#"(map (in 0) (call "inc" (slot)))"#);
        assert_eq!(Expr::parse(&e.canonical()).unwrap(), e);
        assert_eq!(e.cost(), 5);
    }

    #[test]
    fn tables_and_placeholders_in_constants() {
        let t = Value::table(vec![vec![Value::int(1)]]).unwrap();
        let e = Expr::Const(Value::list([t, Value::list([Value::int(1)])]));
        assert_eq!(e.canonical(), r#"(const [{"$table":[[1]]},[1]])"#);
        assert_eq!(Expr::parse(&e.canonical()).unwrap(), e);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "(in)", "(prim add (in 0))", "(nope)", "(const", "(in 0) x", "(prim zzz)"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
        let deep = "(prim neg ".repeat(500) + "(in 0)" + &")".repeat(500);
        assert!(Expr::parse(&deep).is_err());
    }
}
