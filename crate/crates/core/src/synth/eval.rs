use std::fmt;

use super::expr::Expr;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    TypeMismatch,
    DivByZero,
    IndexOutOfRange,
    NotFound,
    MissingKey,
    Overflow,
    Arity,
    UnboundSlot,
    UnknownInput,
    UnknownImport,
    Import,
}

/// An evaluation failure. `path` lists child positions from the root to the
/// failing node.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct EvalError {
    pub kind: ErrorKind,
    pub path: Vec<usize>,
    pub detail: Option<String>,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {:?}", self.kind, self.path)?;
        if let Some(d) = &self.detail {
            write!(f, ": {d}")?;
        }
        Ok(())
    }
}

impl EvalError {
    pub fn new(kind: ErrorKind) -> Self {
        EvalError {
            kind,
            path: Vec::new(),
            detail: None,
        }
    }

    pub fn with_detail(kind: ErrorKind, detail: impl Into<String>) -> Self {
        EvalError {
            kind,
            path: Vec::new(),
            detail: Some(detail.into()),
        }
    }

    fn under(mut self, child: usize) -> Self {
        self.path.insert(0, child);
        self
    }
}

/// Previously compiled programs that expressions may call.
pub trait Imports: Send + Sync {
    /// Names of callable programs, in a fixed order.
    fn names(&self) -> Vec<String>;
    fn arity(&self, name: &str) -> Option<usize>;
    fn call(&self, name: &str, args: &[Value]) -> Result<Value, EvalError>;
}

/// An empty import set.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoImports;

impl Imports for NoImports {
    fn names(&self) -> Vec<String> {
        Vec::new()
    }

    fn arity(&self, _: &str) -> Option<usize> {
        None
    }

    fn call(&self, name: &str, _: &[Value]) -> Result<Value, EvalError> {
        Err(EvalError::with_detail(ErrorKind::UnknownImport, name))
    }
}

pub(crate) fn call_import(imports: &dyn Imports, name: &str, args: &[Value]) -> Result<Value, EvalError> {
    match imports.arity(name) {
        None => Err(EvalError::with_detail(ErrorKind::UnknownImport, name)),
        Some(n) if n != args.len() => Err(EvalError::new(ErrorKind::Arity)),
        Some(_) => imports.call(name, args),
    }
}

/// Evaluates `e` on one set of inputs. Only the taken branch of a
/// conditional is evaluated.
pub fn eval(e: &Expr, inputs: &[Value], imports: &dyn Imports) -> Result<Value, EvalError> {
    eval_in(e, inputs, None, imports)
}

fn eval_in(
    e: &Expr,
    inputs: &[Value],
    slot: Option<&Value>,
    imports: &dyn Imports,
) -> Result<Value, EvalError> {
    match e {
        Expr::Input(i) => inputs
            .get(*i)
            .cloned()
            .ok_or_else(|| EvalError::new(ErrorKind::UnknownInput)),
        Expr::Const(v) => Ok(v.clone()),
        Expr::Slot => slot.cloned().ok_or_else(|| EvalError::new(ErrorKind::UnboundSlot)),
        Expr::Apply(p, args) => {
            let vals = eval_args(args, inputs, slot, imports)?;
            let refs: Vec<&Value> = vals.iter().collect();
            p.apply(&refs).map_err(EvalError::new)
        }
        Expr::CallImport(name, args) => {
            let vals = eval_args(args, inputs, slot, imports)?;
            call_import(imports, name, &vals)
        }
        Expr::If(p, t, f) => match eval_in(p, inputs, slot, imports).map_err(|x| x.under(0))? {
            Value::Bool(true) => eval_in(t, inputs, slot, imports).map_err(|x| x.under(1)),
            Value::Bool(false) => eval_in(f, inputs, slot, imports).map_err(|x| x.under(2)),
            _ => Err(EvalError::new(ErrorKind::TypeMismatch).under(0)),
        },
        Expr::MapOver(l, body) => {
            let list = eval_in(l, inputs, slot, imports).map_err(|x| x.under(0))?;
            let Value::List(items) = list else {
                return Err(EvalError::new(ErrorKind::TypeMismatch).under(0));
            };
            items
                .iter()
                .map(|item| eval_in(body, inputs, Some(item), imports).map_err(|x| x.under(1)))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::List)
        }
    }
}

fn eval_args(
    args: &[Expr],
    inputs: &[Value],
    slot: Option<&Value>,
    imports: &dyn Imports,
) -> Result<Vec<Value>, EvalError> {
    args.iter()
        .enumerate()
        .map(|(i, a)| eval_in(a, inputs, slot, imports).map_err(|x| x.under(i)))
        .collect()
}
