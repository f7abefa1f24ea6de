//! The textual Zoea dialect.
//!
//! A program is a sequence of `tag: value` fields. Layout is not significant:
//! a field's value is everything between its tag and the next tag token, read
//! as relaxed JSON (bare words, single-quoted strings). Tags are only
//! recognised outside strings and brackets, at the start of a token.
//!
//! ```text
//! program: is_week_day
//! data: [monday, tuesday]
//! case: 1 input: monday output: weekday
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::diagnostic::Diagnostic;
use crate::value::{self, Mode, Value, ValueError, WriteStyle};

const TAGS: [&str; 7] = ["program", "use", "data", "case", "input", "derive", "output"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: unknown tag `{token}`")]
    UnknownTag { token: String, line: usize },
    #[error("case {case}: missing `{field}`")]
    MissingField { case: String, field: &'static str },
    #[error("line {line}: duplicate `{tag}`{}", case_suffix(.case))]
    DuplicateField {
        case: Option<String>,
        tag: String,
        line: usize,
    },
    #[error("line {line}: {detail}")]
    ValueParseError { line: usize, detail: String },
    #[error("program has no cases")]
    NoCases,
    #[error("line {line}: expected `program:` first")]
    MissingProgram { line: usize },
    #[error("line {line}: `{tag}` outside of a case")]
    OutsideCase { tag: String, line: usize },
}

fn case_suffix(case: &Option<String>) -> String {
    case.as_ref().map(|c| format!(" in case {c}")).unwrap_or_default()
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::UnknownTag { line, .. }
            | ParseError::DuplicateField { line, .. }
            | ParseError::ValueParseError { line, .. }
            | ParseError::MissingProgram { line }
            | ParseError::OutsideCase { line, .. } => Some(*line),
            ParseError::MissingField { .. } | ParseError::NoCases => None,
        }
    }
}

/// Where a comment sits relative to the fields of a program. Comments print
/// immediately before the field they are anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Program,
    Use(usize),
    Data,
    Case(usize),
    Input(usize),
    Derive(usize, usize),
    Output(usize),
    End,
}

#[derive(Debug, Clone, Eq)]
pub struct Comment {
    /// Source line; not part of equality.
    pub line: usize,
    /// Text after the `#`.
    pub text: String,
    pub anchor: Anchor,
}

impl PartialEq for Comment {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text && self.anchor == other.anchor
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoeaCase {
    /// Scalar label.
    pub id: Value,
    pub input: Value,
    /// Intermediate steps in order of appearance.
    pub derives: Vec<Value>,
    pub output: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoeaProgram {
    pub name: String,
    pub uses: Vec<String>,
    pub data: Option<Value>,
    pub cases: Vec<ZoeaCase>,
    pub comments: Vec<Comment>,
}

impl ZoeaProgram {
    pub fn without_comments(mut self) -> Self {
        self.comments.clear();
        self
    }
}

struct Field<'a> {
    tag: &'a str,
    offset: usize,
    line: usize,
    value: &'a str,
}

struct Scan<'a> {
    preamble: &'a str,
    fields: Vec<Field<'a>>,
    /// (offset, line, text)
    comments: Vec<(usize, usize, &'a str)>,
}

fn is_word_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn is_bare_byte(c: u8) -> bool {
    !c.is_ascii_whitespace()
        && !matches!(c, b'[' | b']' | b'{' | b'}' | b',' | b':' | b'"' | b'\'' | b'#')
}

/// Splits the source into tag fields, skipping over strings, brackets and comments.
fn scan(src: &str) -> Scan<'_> {
    let b = src.as_bytes();
    // (tag, offset, line, value start)
    let mut tags: Vec<(&str, usize, usize, usize)> = Vec::new();
    let mut comments = Vec::new();
    let mut line = 1;
    let mut depth = 0usize;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        match c {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b'"' | b'\'' => {
                i += 1;
                while i < b.len() && b[i] != c {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    if b.get(i) == Some(&b'\n') {
                        line += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            b'#' => {
                let start = i;
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                comments.push((start, line, src[start + 1..i].trim_end_matches('\r')));
            }
            b'[' | b'{' => {
                depth += 1;
                i += 1;
            }
            b']' | b'}' => {
                depth = depth.saturating_sub(1);
                i += 1;
            }
            _ if depth == 0
                && (c.is_ascii_alphabetic() || c == b'_')
                && (i == 0 || !is_bare_byte(b[i - 1])) =>
            {
                let mut j = i;
                while j < b.len() && is_word_char(b[j]) {
                    j += 1;
                }
                if b.get(j) == Some(&b':') {
                    tags.push((&src[i..j], i, line, j + 1));
                    i = j + 1;
                } else {
                    i = j;
                }
            }
            _ => i += 1,
        }
    }
    let fields = tags
        .iter()
        .enumerate()
        .map(|(k, &(tag, offset, line, start))| {
            let end = tags.get(k + 1).map_or(src.len(), |t| t.1);
            Field {
                tag,
                offset,
                line,
                value: &src[start.min(end)..end],
            }
        })
        .collect();
    let preamble_end = tags.first().map_or(src.len(), |t| t.1);
    Scan {
        preamble: &src[..preamble_end],
        fields,
        comments,
    }
}

fn parse_field_value(field: &Field<'_>) -> Result<Value, ParseError> {
    let body = field.value;
    if strip_comments_blank(body) {
        return Err(ParseError::ValueParseError {
            line: field.line,
            detail: format!("`{}:` has no value", field.tag),
        });
    }
    value::parse_complete(body, Mode::Relaxed).map_err(|e| match e {
        ValueError::Parse { line, message, .. } => ParseError::ValueParseError {
            line: field.line + line - 1,
            detail: message,
        },
        other => ParseError::ValueParseError {
            line: field.line,
            detail: other.to_string(),
        },
    })
}

fn strip_comments_blank(body: &str) -> bool {
    body.lines()
        .all(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
}

fn name_of(v: Value, field: &Field<'_>) -> Result<String, ParseError> {
    let name = match v {
        Value::Text(s) => s,
        Value::Number(n) => n.lexical().to_string(),
        other => {
            return Err(ParseError::ValueParseError {
                line: field.line,
                detail: format!("`{}:` expects a name, found {}", field.tag, other.kind()),
            })
        }
    };
    if name.is_empty() {
        return Err(ParseError::ValueParseError {
            line: field.line,
            detail: format!("`{}:` name is empty", field.tag),
        });
    }
    Ok(name)
}

fn label(id: &Value) -> String {
    match id {
        Value::Text(s) => s.clone(),
        other => other.to_string(),
    }
}

struct OpenCase {
    id: Value,
    input: Option<Value>,
    derives: Vec<Value>,
    output: Option<Value>,
}

impl OpenCase {
    fn finish(self) -> Result<ZoeaCase, ParseError> {
        let case = label(&self.id);
        let input = self.input.ok_or_else(|| ParseError::MissingField {
            case: case.clone(),
            field: "input",
        })?;
        let output = self.output.ok_or(ParseError::MissingField {
            case,
            field: "output",
        })?;
        Ok(ZoeaCase {
            id: self.id,
            input,
            derives: self.derives,
            output,
        })
    }
}

/// Parses a `.zoea` source text.
pub fn parse(source: &str) -> Result<ZoeaProgram, ParseError> {
    let scan = scan(source);
    if let Some((offset, _)) = scan
        .preamble
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
    {
        return Err(ParseError::MissingProgram { line: offset + 1 });
    }
    let Some(first) = scan.fields.first() else {
        return Err(ParseError::MissingProgram { line: 1 });
    };
    if first.tag != "program" {
        if !TAGS.contains(&first.tag) {
            return Err(ParseError::UnknownTag {
                token: format!("{}:", first.tag),
                line: first.line,
            });
        }
        return Err(ParseError::MissingProgram { line: first.line });
    }

    let mut name = String::new();
    let mut uses = Vec::new();
    let mut data = None;
    let mut cases: Vec<ZoeaCase> = Vec::new();
    let mut current: Option<OpenCase> = None;
    // Anchor of each field, by field index.
    let mut anchors = Vec::with_capacity(scan.fields.len());

    for (index, field) in scan.fields.iter().enumerate() {
        let case_index = cases.len();
        let anchor = match field.tag {
            "program" => {
                if index > 0 {
                    return Err(ParseError::DuplicateField {
                        case: None,
                        tag: "program".into(),
                        line: field.line,
                    });
                }
                name = name_of(parse_field_value(field)?, field)?;
                Anchor::Program
            }
            "use" | "data" | "case" => {
                if let Some(open) = current.take() {
                    cases.push(open.finish()?);
                }
                let case_index = cases.len();
                match field.tag {
                    "use" => {
                        uses.push(name_of(parse_field_value(field)?, field)?);
                        Anchor::Use(uses.len() - 1)
                    }
                    "data" => {
                        if data.is_some() {
                            return Err(ParseError::DuplicateField {
                                case: None,
                                tag: "data".into(),
                                line: field.line,
                            });
                        }
                        data = Some(parse_field_value(field)?);
                        Anchor::Data
                    }
                    _ => {
                        let id = parse_field_value(field)?;
                        if !id.is_scalar() {
                            return Err(ParseError::ValueParseError {
                                line: field.line,
                                detail: format!("case id must be a scalar, found {}", id.kind()),
                            });
                        }
                        current = Some(OpenCase {
                            id,
                            input: None,
                            derives: Vec::new(),
                            output: None,
                        });
                        Anchor::Case(case_index)
                    }
                }
            }
            "input" | "derive" | "output" => {
                let Some(open) = current.as_mut() else {
                    return Err(ParseError::OutsideCase {
                        tag: field.tag.to_string(),
                        line: field.line,
                    });
                };
                let v = parse_field_value(field)?;
                let dup = |tag: &str| ParseError::DuplicateField {
                    case: Some(label(&open.id)),
                    tag: tag.to_string(),
                    line: field.line,
                };
                match field.tag {
                    "input" => {
                        if open.input.is_some() {
                            return Err(dup("input"));
                        }
                        open.input = Some(v);
                        Anchor::Input(case_index)
                    }
                    "output" => {
                        if open.output.is_some() {
                            return Err(dup("output"));
                        }
                        open.output = Some(v);
                        Anchor::Output(case_index)
                    }
                    _ => {
                        open.derives.push(v);
                        Anchor::Derive(case_index, open.derives.len() - 1)
                    }
                }
            }
            other => {
                return Err(ParseError::UnknownTag {
                    token: format!("{other}:"),
                    line: field.line,
                })
            }
        };
        anchors.push(anchor);
    }
    if let Some(open) = current.take() {
        cases.push(open.finish()?);
    }
    if cases.is_empty() {
        return Err(ParseError::NoCases);
    }
    let comments = scan
        .comments
        .into_iter()
        .map(|(offset, line, text)| {
            let next = scan.fields.iter().position(|f| f.offset > offset);
            Comment {
                line,
                text: text.to_string(),
                anchor: next.map_or(Anchor::End, |n| anchors[n]),
            }
        })
        .collect();
    Ok(ZoeaProgram {
        name,
        uses,
        data,
        cases,
        comments,
    })
}

fn is_plain_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !matches!(s, "true" | "false" | "null")
        && !TAGS.contains(&s)
}

fn write_name(out: &mut String, name: &str) {
    if is_plain_name(name) {
        out.push_str(name);
    } else {
        value::write_string(name, out);
    }
}

fn write_data(out: &mut String, v: &Value) {
    // Programs never carry placeholders; if one slips through it prints as null.
    if value::write_value(v, out, WriteStyle::PLAIN).is_err() {
        out.push_str("null");
    }
}

/// Prints a program in canonical layout: one tag per line, double-quoted
/// strings, comments on their own lines before the field they precede.
pub fn print(p: &ZoeaProgram) -> String {
    let mut out = String::new();
    let comments = |out: &mut String, anchor: Anchor| {
        for c in p.comments.iter().filter(|c| c.anchor == anchor) {
            let _ = writeln!(out, "#{}", c.text);
        }
    };
    comments(&mut out, Anchor::Program);
    out.push_str("program: ");
    write_name(&mut out, &p.name);
    out.push('\n');
    for (i, u) in p.uses.iter().enumerate() {
        comments(&mut out, Anchor::Use(i));
        out.push_str("use: ");
        write_name(&mut out, u);
        out.push('\n');
    }
    if let Some(data) = &p.data {
        comments(&mut out, Anchor::Data);
        out.push_str("data: ");
        write_data(&mut out, data);
        out.push('\n');
    }
    for (i, case) in p.cases.iter().enumerate() {
        comments(&mut out, Anchor::Case(i));
        out.push_str("case: ");
        write_data(&mut out, &case.id);
        out.push('\n');
        comments(&mut out, Anchor::Input(i));
        out.push_str("input: ");
        write_data(&mut out, &case.input);
        out.push('\n');
        for (j, d) in case.derives.iter().enumerate() {
            comments(&mut out, Anchor::Derive(i, j));
            out.push_str("derive: ");
            write_data(&mut out, d);
            out.push('\n');
        }
        comments(&mut out, Anchor::Output(i));
        out.push_str("output: ");
        write_data(&mut out, &case.output);
        out.push('\n');
    }
    comments(&mut out, Anchor::End);
    out
}

/// Checks a program for problems the parser does not reject. Every `use`
/// target is reported as unresolved; see [`validate_against`].
pub fn validate(p: &ZoeaProgram) -> Vec<Diagnostic> {
    validate_against(p, &BTreeSet::new())
}

/// Like [`validate`], but `use` targets in `known` are not reported.
pub fn validate_against(p: &ZoeaProgram, known: &BTreeSet<String>) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if p.name.is_empty() {
        diags.push(Diagnostic::error("empty-name", "program name is empty"));
    }
    if p.cases.is_empty() {
        diags.push(Diagnostic::error("no-cases", "program has no cases"));
    }
    for (i, case) in p.cases.iter().enumerate() {
        if p.cases[..i].iter().any(|c| c.id == case.id) {
            diags.push(Diagnostic::error(
                "duplicate-case-id",
                format!("case id {} is used more than once", label(&case.id)),
            ));
        }
        let values = std::iter::once(&case.input)
            .chain(&case.derives)
            .chain(std::iter::once(&case.output));
        if values.into_iter().any(Value::contains_empty) {
            diags.push(Diagnostic::error(
                "empty-value",
                format!("case {} contains an empty placeholder", label(&case.id)),
            ));
        }
    }
    if let Some(first) = p.cases.first() {
        if p.cases.iter().any(|c| c.derives.len() != first.derives.len()) {
            let counts: Vec<String> = p
                .cases
                .iter()
                .map(|c| format!("{}:{}", label(&c.id), c.derives.len()))
                .collect();
            diags.push(Diagnostic::warning(
                "unequal-derive-counts",
                format!("cases have different numbers of derived values ({})", counts.join(", ")),
            ));
        }
    }
    for u in &p.uses {
        if !known.contains(u) {
            diags.push(Diagnostic::info(
                "unresolved-use",
                format!("`use: {u}` will be resolved at compile time"),
            ));
        }
    }
    diags
}
