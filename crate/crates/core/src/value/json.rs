//! JSON reading and writing for [`Value`].
//!
//! One scanner serves two dialects. `Strict` is ECMA-404 JSON. `Relaxed` is
//! the data syntax of `.zoea` files: single-quoted strings, `#` comments and
//! bare words (which become numbers, literals or text).
//!
//! The *tagged* encoding is plain JSON with three reserved single-key
//! objects, used wherever a value must survive a round trip exactly:
//! `{"$empty": kind}` for placeholders, `{"$table": rows}` for tables that are
//! not disambiguated by a shape hint, and `{"$object": {...}}` to escape a
//! genuine object whose only key starts with `$`.

use std::fmt::Write as _;

use super::{Kind, Number, Object, Table, Value, ValueError};

const MAX_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Strict,
    Relaxed,
}

/// Parses one value from the start of `src` (after leading whitespace).
/// Returns the value and the byte offset just past it.
pub(crate) fn parse_prefix(src: &str, mode: Mode) -> Result<(Value, usize), ValueError> {
    let mut p = Parser {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        mode,
        depth: 0,
    };
    p.skip_ws();
    let v = p.value()?;
    Ok((v, p.pos))
}

/// Parses a complete document: one value, optionally surrounded by whitespace.
pub(crate) fn parse_complete(src: &str, mode: Mode) -> Result<Value, ValueError> {
    let mut p = Parser {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        mode,
        depth: 0,
    };
    p.skip_ws();
    let v = p.value()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.error("unexpected trailing content"));
    }
    Ok(v)
}

/// Parses strict JSON. `hint` selects how the top level is read; in particular
/// `Kind::Table` turns an array of equal-length arrays into a [`Table`].
pub fn from_json(text: &str, hint: Option<Kind>) -> Result<Value, ValueError> {
    let v = parse_complete(text, Mode::Strict)?;
    apply_hint(v, hint)
}

/// Parses the tagged encoding produced by [`to_tagged_json`].
pub fn from_tagged_json(text: &str, hint: Option<Kind>) -> Result<Value, ValueError> {
    let v = parse_complete(text, Mode::Strict)?;
    let v = apply_hint(v, hint)?;
    untag(v)
}

pub(crate) fn apply_hint(v: Value, hint: Option<Kind>) -> Result<Value, ValueError> {
    match (hint, v) {
        (None, v) => Ok(v),
        (Some(Kind::Table), Value::List(rows)) => {
            let rows = rows
                .into_iter()
                .map(|r| match r {
                    Value::List(cells) => Ok(cells),
                    other => Err(ValueError::Shape(format!(
                        "table rows must be arrays, found {}",
                        other.kind()
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Table::new(rows).map(Value::Table)
        }
        // A tagged table or placeholder is resolved later by `untag`.
        (Some(_), v @ Value::Object(_)) if is_sentinel(&v) => Ok(v),
        (Some(hint), v) if v.kind() == hint => Ok(v),
        (Some(hint), v) => Err(ValueError::Shape(format!(
            "expected {hint}, found {}",
            v.kind()
        ))),
    }
}

fn is_sentinel(v: &Value) -> bool {
    match v {
        Value::Object(o) => {
            o.len() == 1 && matches!(o.entries()[0].0.as_str(), "$empty" | "$table" | "$object")
        }
        _ => false,
    }
}

pub(crate) fn untag(v: Value) -> Result<Value, ValueError> {
    match v {
        Value::List(items) => items.into_iter().map(untag).collect::<Result<_, _>>().map(Value::List),
        Value::Table(t) => {
            let rows = t
                .into_rows()
                .into_iter()
                .map(|r| r.into_iter().map(untag).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            Table::new(rows).map(Value::Table)
        }
        Value::Object(o) if o.len() == 1 && o.entries()[0].0.starts_with('$') => {
            let (key, inner) = o.entries.into_iter().next().expect("one entry");
            match (key.as_str(), inner) {
                ("$empty", Value::Text(k)) => Ok(Value::Empty(k.parse()?)),
                ("$table", v @ Value::List(_)) => untag(apply_hint(v, Some(Kind::Table))?),
                ("$object", Value::Object(inner)) => untag_entries(inner),
                (key, _) => Err(ValueError::Shape(format!("malformed `{key}` sentinel"))),
            }
        }
        Value::Object(o) => untag_entries(o),
        other => Ok(other),
    }
}

fn untag_entries(o: Object) -> Result<Value, ValueError> {
    let entries = o
        .entries
        .into_iter()
        .map(|(k, v)| untag(v).map(|v| (k, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Value::Object(Object { entries }))
}

/// Serializes to compact standard JSON. Tables become arrays of arrays.
pub fn to_json(v: &Value) -> Result<String, ValueError> {
    let mut out = String::new();
    write_value(v, &mut out, WriteStyle::PLAIN)?;
    Ok(out)
}

/// Serializes to the tagged encoding. When `hint` is `Some(Kind::Table)` a
/// top-level table is written as a plain array of arrays.
pub fn to_tagged_json(v: &Value, hint: Option<Kind>) -> String {
    let mut out = String::new();
    let style = WriteStyle {
        plain_top_table: hint == Some(Kind::Table),
        ..WriteStyle::TAGGED
    };
    write_value(v, &mut out, style).expect("tagged encoding is total");
    out
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct WriteStyle {
    pub tagged: bool,
    pub normalize_numbers: bool,
    pub display: bool,
    pub plain_top_table: bool,
}

impl WriteStyle {
    pub const PLAIN: WriteStyle = WriteStyle {
        tagged: false,
        normalize_numbers: false,
        display: false,
        plain_top_table: true,
    };
    pub const TAGGED: WriteStyle = WriteStyle {
        tagged: true,
        normalize_numbers: false,
        display: false,
        plain_top_table: false,
    };
    pub const CANONICAL: WriteStyle = WriteStyle {
        tagged: true,
        normalize_numbers: true,
        display: false,
        plain_top_table: false,
    };
    pub const DISPLAY: WriteStyle = WriteStyle {
        tagged: false,
        normalize_numbers: false,
        display: true,
        plain_top_table: true,
    };
}

pub(crate) fn write_value(v: &Value, out: &mut String, style: WriteStyle) -> Result<(), ValueError> {
    write_at(v, out, style, true)
}

fn write_at(v: &Value, out: &mut String, style: WriteStyle, top: bool) -> Result<(), ValueError> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if style.normalize_numbers {
                out.push_str(&n.canonical());
            } else {
                out.push_str(n.lexical());
            }
        }
        Value::Text(s) => write_string(s, out),
        Value::List(items) => write_array(items, out, style)?,
        Value::Table(t) => {
            let wrap = style.tagged && !(top && style.plain_top_table);
            if wrap {
                out.push_str("{\"$table\":");
            }
            out.push('[');
            for (i, row) in t.rows().iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_array(row, out, style)?;
            }
            out.push(']');
            if wrap {
                out.push('}');
            }
        }
        Value::Object(o) => {
            let escape = style.tagged && o.len() == 1 && o.entries()[0].0.starts_with('$');
            if escape {
                out.push_str("{\"$object\":");
            }
            out.push('{');
            for (i, (k, v)) in o.entries().iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(k, out);
                out.push(':');
                write_at(v, out, style, false)?;
            }
            out.push('}');
            if escape {
                out.push('}');
            }
        }
        Value::Empty(k) => {
            if style.tagged {
                let _ = write!(out, "{{\"$empty\":\"{k}\"}}");
            } else if style.display {
                let _ = write!(out, "<empty {k}>");
            } else {
                return Err(ValueError::EmptyPresent(*k));
            }
        }
    }
    Ok(())
}

fn write_array(items: &[Value], out: &mut String, style: WriteStyle) -> Result<(), ValueError> {
    out.push('[');
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_at(item, out, style, false)?;
    }
    out.push(']');
    Ok(())
}

pub(crate) fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn is_bare_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '[' | ']' | '{' | '}' | ',' | ':' | '"' | '\'' | '#')
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    mode: Mode,
    depth: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ValueError {
        let offset = self.pos.min(self.src.len());
        let before = &self.src[..floor_char_boundary(self.src, offset)];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ValueError::Parse {
            offset,
            line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b) = self.peek() {
            match b {
                b' ' | b'\t' | b'\n' | b'\r' => self.pos += 1,
                b'#' if self.mode == Mode::Relaxed => {
                    while self.peek().is_some_and(|b| b != b'\n') {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn value(&mut self) -> Result<Value, ValueError> {
        match self.peek() {
            None => Err(self.error("expected a value, found end of input")),
            Some(b'[') => self.array(),
            Some(b'{') => self.object(),
            Some(b'"') => self.string(b'"').map(Value::Text),
            Some(b'\'') if self.mode == Mode::Relaxed => self.string(b'\'').map(Value::Text),
            Some(_) => self.atom(),
        }
    }

    fn enter(&mut self) -> Result<(), ValueError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error("nesting too deep"));
        }
        Ok(())
    }

    fn array(&mut self) -> Result<Value, ValueError> {
        self.enter()?;
        self.pos += 1;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            self.depth -= 1;
            return Ok(Value::List(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.error("expected `,` or `]` in array")),
            }
        }
        self.depth -= 1;
        Ok(Value::List(items))
    }

    fn object(&mut self) -> Result<Value, ValueError> {
        self.enter()?;
        self.pos += 1;
        let mut entries: Vec<(String, Value)> = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            self.depth -= 1;
            return Ok(Value::Object(Object { entries }));
        }
        loop {
            self.skip_ws();
            let key_pos = self.pos;
            let key = match self.peek() {
                Some(b'"') => self.string(b'"')?,
                Some(b'\'') if self.mode == Mode::Relaxed => self.string(b'\'')?,
                Some(_) if self.mode == Mode::Relaxed => {
                    let word = self.bare_word();
                    if word.is_empty() {
                        return Err(self.error("expected an object key"));
                    }
                    word.to_string()
                }
                _ => return Err(self.error("expected a string object key")),
            };
            if entries.iter().any(|(k, _)| *k == key) {
                self.pos = key_pos;
                return Err(self.error(format!("duplicate object key `{key}`")));
            }
            self.skip_ws();
            if self.peek() != Some(b':') {
                return Err(self.error("expected `:` after object key"));
            }
            self.pos += 1;
            self.skip_ws();
            let v = self.value()?;
            entries.push((key, v));
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.error("expected `,` or `}` in object")),
            }
        }
        self.depth -= 1;
        Ok(Value::Object(Object { entries }))
    }

    fn string(&mut self, quote: u8) -> Result<String, ValueError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let rest = &self.src[self.pos..];
            let Some(c) = rest.chars().next() else {
                return Err(self.error("unterminated string"));
            };
            if c as u32 == quote as u32 {
                self.pos += 1;
                return Ok(out);
            }
            match c {
                '\\' => {
                    self.pos += 1;
                    let Some(e) = self.peek() else {
                        return Err(self.error("unterminated escape"));
                    };
                    self.pos += 1;
                    match e {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'b' => out.push('\u{08}'),
                        b'f' => out.push('\u{0c}'),
                        b'n' => out.push('\n'),
                        b'r' => out.push('\r'),
                        b't' => out.push('\t'),
                        b'\'' if self.mode == Mode::Relaxed => out.push('\''),
                        b'u' => out.push(self.unicode_escape()?),
                        _ => {
                            self.pos -= 1;
                            return Err(self.error("invalid escape sequence"));
                        }
                    }
                }
                c if (c as u32) < 0x20 => return Err(self.error("control character in string")),
                c => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, ValueError> {
        let digits = self
            .src
            .get(self.pos..self.pos + 4)
            .filter(|d| d.bytes().all(|b| b.is_ascii_hexdigit()))
            .ok_or_else(|| self.error("invalid \\u escape"))?;
        self.pos += 4;
        Ok(u32::from_str_radix(digits, 16).expect("validated hex"))
    }

    fn unicode_escape(&mut self) -> Result<char, ValueError> {
        let hi = self.hex4()?;
        if (0xD800..0xDC00).contains(&hi) {
            if self.src.get(self.pos..self.pos + 2) != Some("\\u") {
                return Err(self.error("unpaired surrogate in \\u escape"));
            }
            self.pos += 2;
            let lo = self.hex4()?;
            if !(0xDC00..0xE000).contains(&lo) {
                return Err(self.error("invalid low surrogate in \\u escape"));
            }
            let c = 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00);
            return char::from_u32(c).ok_or_else(|| self.error("invalid code point"));
        }
        char::from_u32(hi).ok_or_else(|| self.error("unpaired surrogate in \\u escape"))
    }

    fn bare_word(&mut self) -> &str {
        let start = self.pos;
        let len: usize = self.src[start..]
            .chars()
            .take_while(|&c| is_bare_char(c))
            .map(char::len_utf8)
            .sum();
        self.pos += len;
        &self.src[start..start + len]
    }

    fn atom(&mut self) -> Result<Value, ValueError> {
        let start = self.pos;
        let word = match self.mode {
            Mode::Relaxed => self.bare_word().to_string(),
            Mode::Strict => {
                let len = self.bytes[start..]
                    .iter()
                    .take_while(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'+' | b'.'))
                    .count();
                self.pos += len;
                self.src[start..start + len].to_string()
            }
        };
        if word.is_empty() {
            return Err(self.error("unexpected character"));
        }
        let v = match word.as_str() {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            "null" => Value::Null,
            w if super::is_json_number(w) => match Number::parse(w) {
                Some(n) => Value::Number(n),
                None => {
                    self.pos = start;
                    return Err(self.error(format!("number `{w}` is out of range")));
                }
            },
            w => match self.mode {
                Mode::Relaxed => Value::Text(w.to_string()),
                Mode::Strict => {
                    self.pos = start;
                    return Err(self.error(format!("invalid literal `{w}`")));
                }
            },
        };
        Ok(v)
    }
}

fn floor_char_boundary(s: &str, mut i: usize) -> usize {
    while !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relaxed(s: &str) -> Value {
        parse_complete(s, Mode::Relaxed).unwrap()
    }

    #[test]
    fn list_to_json() {
        let v = Value::list([Value::text("monday"), Value::text("tuesday")]);
        assert_eq!(to_json(&v).unwrap(), r#"["monday","tuesday"]"#);
    }

    #[test]
    fn null_to_json() {
        assert_eq!(to_json(&Value::Null).unwrap(), "null");
    }

    #[test]
    fn table_to_json() {
        let t = Value::table(vec![
            vec![Value::int(1), Value::int(2)],
            vec![Value::int(3), Value::int(4)],
        ])
        .unwrap();
        assert_eq!(to_json(&t).unwrap(), "[[1,2],[3,4]]");
    }

    #[test]
    fn empty_marker_rejected() {
        let v = Value::list([Value::Empty(Kind::Scalar)]);
        assert_eq!(to_json(&v), Err(ValueError::EmptyPresent(Kind::Scalar)));
    }

    #[test]
    fn hints() {
        assert_eq!(
            from_json(r#"["a"]"#, Some(Kind::List)).unwrap(),
            Value::list([Value::text("a")])
        );
        let t = from_json("[[1],[2]]", Some(Kind::Table)).unwrap();
        match t {
            Value::Table(t) => assert_eq!((t.row_count(), t.col_count()), (2, 1)),
            other => panic!("expected table, got {other:?}"),
        }
        assert!(matches!(
            from_json("[[1],[2,3]]", Some(Kind::Table)),
            Err(ValueError::Shape(_))
        ));
        assert!(matches!(from_json("[1]", Some(Kind::Object)), Err(ValueError::Shape(_))));
    }

    #[test]
    fn object_roundtrip_preserves_order() {
        let v = from_json(r#"{"k":[1,2],"a":null}"#, None).unwrap();
        assert_eq!(to_json(&v).unwrap(), r#"{"k":[1,2],"a":null}"#);
    }

    #[test]
    fn parse_error_position() {
        let err = from_json("[1,\n  2,,3]", None).unwrap_err();
        match err {
            ValueError::Parse { line, column, .. } => assert_eq!((line, column), (2, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strict_rejects_relaxed_syntax() {
        assert!(from_json("monday", None).is_err());
        assert!(from_json("'x'", None).is_err());
        assert!(from_json("[1] # c", None).is_err());
        assert!(from_json("01", None).is_err());
    }

    #[test]
    fn relaxed_bare_words() {
        assert_eq!(relaxed("thursday"), Value::text("thursday"));
        assert_eq!(relaxed("''"), Value::text(""));
        assert_eq!(relaxed("'MONDAY'"), Value::text("MONDAY"));
        assert_eq!(relaxed("-2.5"), Value::Number(Number::parse("-2.5").unwrap()));
        assert_eq!(relaxed("1.2.3"), Value::text("1.2.3"));
        assert_eq!(relaxed("true"), Value::Bool(true));
        assert_eq!(
            relaxed("[ monday, # first\n tuesday ]"),
            Value::list([Value::text("monday"), Value::text("tuesday")])
        );
        assert_eq!(
            relaxed("{a: 1, 'b c': x}"),
            Value::object(vec![("a".into(), Value::int(1)), ("b c".into(), Value::text("x"))]).unwrap()
        );
    }

    #[test]
    fn escapes() {
        assert_eq!(from_json(r#""😀\n""#, None).unwrap(), Value::text("😀\n"));
        assert!(from_json(r#""\ud83d""#, None).is_err());
        let s = Value::text("a\"b\\c\u{1}é");
        assert_eq!(from_json(&to_json(&s).unwrap(), None).unwrap(), s);
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = "[".repeat(100_000);
        assert!(from_json(&src, None).is_err());
    }

    #[test]
    fn tagged_roundtrip_of_awkward_values() {
        let nested_table = Value::table(vec![vec![Value::int(1)]]).unwrap();
        let dollar = Value::object(vec![("$table".into(), Value::int(1))]).unwrap();
        let v = Value::list([
            nested_table.clone(),
            Value::Empty(Kind::Object),
            dollar.clone(),
            Value::list([Value::list([Value::int(1)])]),
        ]);
        let text = to_tagged_json(&v, None);
        assert_eq!(from_tagged_json(&text, None).unwrap(), v);
        let top = to_tagged_json(&nested_table, Some(Kind::Table));
        assert_eq!(top, "[[1]]");
        assert_eq!(from_tagged_json(&top, Some(Kind::Table)).unwrap(), nested_table);
        let empty = to_tagged_json(&Value::Empty(Kind::Table), Some(Kind::Table));
        assert_eq!(from_tagged_json(&empty, Some(Kind::Table)).unwrap(), Value::Empty(Kind::Table));
    }
}
