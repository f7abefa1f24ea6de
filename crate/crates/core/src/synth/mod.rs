//! Program synthesis from input/output examples.
//!
//! [`synthesize`] searches for the cheapest [`Expr`] that maps every example's
//! inputs to its output. The search runs cost tier by cost tier. In each tier
//! a fixed sequence of knowledge sources posts hypotheses to a shared bank of
//! expressions, keyed by the values they produce on the examples so that only
//! one expression per behaviour is kept. All solutions of the first
//! successful tier are compared by canonical text and the smallest wins.

pub mod catalog;
mod eval;
mod expr;
mod search;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::value::Value;

pub use catalog::{catalog_v1, Prim, Primitive, Ty, CATALOG_VERSION};
pub use eval::{eval, ErrorKind, EvalError, Imports, NoImports};
pub use expr::{Expr, ExprParseError};

/// One training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub inputs: Vec<Value>,
    pub output: Value,
}

impl Example {
    pub fn new(inputs: Vec<Value>, output: Value) -> Self {
        Example { inputs, output }
    }
}

#[derive(Clone)]
pub struct SynthesisProblem {
    pub cases: Vec<Example>,
    /// Reference values the search may use as constants.
    pub constants_pool: Vec<Value>,
    pub imports: Arc<dyn Imports>,
}

impl fmt::Debug for SynthesisProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SynthesisProblem")
            .field("cases", &self.cases)
            .field("constants_pool", &self.constants_pool)
            .field("imports", &self.imports.names())
            .finish()
    }
}

impl SynthesisProblem {
    pub fn new(cases: Vec<Example>) -> Self {
        SynthesisProblem {
            cases,
            constants_pool: Vec::new(),
            imports: Arc::new(NoImports),
        }
    }

    pub fn with_constants(mut self, pool: Vec<Value>) -> Self {
        self.constants_pool = pool;
        self
    }

    pub fn with_imports(mut self, imports: Arc<dyn Imports>) -> Self {
        self.imports = imports;
        self
    }

    pub fn arity(&self) -> usize {
        self.cases.first().map_or(0, |c| c.inputs.len())
    }

    fn check(&self) -> Result<(), String> {
        if self.cases.is_empty() {
            return Err("a problem needs at least one example".into());
        }
        let arity = self.arity();
        if self.cases.iter().any(|c| c.inputs.len() != arity) {
            return Err("examples disagree on the number of inputs".into());
        }
        let placeholder = self
            .cases
            .iter()
            .flat_map(|c| c.inputs.iter().chain([&c.output]))
            .chain(&self.constants_pool)
            .any(Value::contains_empty);
        if placeholder {
            return Err("examples and constants cannot contain empty placeholders".into());
        }
        Ok(())
    }

    /// The constants visible to search: the pool, then scalars found in the
    /// outputs (at most 16), then 0 and 1. Duplicates are dropped.
    pub fn search_constants(&self) -> Vec<Value> {
        let mut out: Vec<Value> = Vec::new();
        let push = |v: &Value, out: &mut Vec<Value>| {
            if !out.contains(v) {
                out.push(v.clone());
            }
        };
        for v in &self.constants_pool {
            push(v, &mut out);
        }
        let mut scalars = Vec::new();
        for c in &self.cases {
            collect_scalars(&c.output, &mut scalars);
        }
        for s in scalars.iter().take(MAX_OUTPUT_CONSTANTS) {
            push(s, &mut out);
        }
        push(&Value::int(0), &mut out);
        push(&Value::int(1), &mut out);
        out
    }
}

const MAX_OUTPUT_CONSTANTS: usize = 16;

fn collect_scalars(v: &Value, out: &mut Vec<Value>) {
    match v {
        Value::List(items) => items.iter().for_each(|x| collect_scalars(x, out)),
        Value::Table(t) => t.rows().iter().flatten().for_each(|x| collect_scalars(x, out)),
        Value::Object(o) => o.entries().iter().for_each(|(_, x)| collect_scalars(x, out)),
        Value::Empty(_) => {}
        scalar => {
            if !out.contains(scalar) {
                out.push(scalar.clone());
            }
        }
    }
}

/// The strategies that contribute hypotheses, in the order they run within
/// each cost tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeSource {
    /// Outputs that are all equal become a constant.
    ConstantDetector,
    /// An input that equals the output.
    Projection,
    /// One primitive applied to inputs and constants.
    SinglePrimitive,
    /// Compositions of primitives, maps and imported programs.
    Enumerator,
    /// Conditionals that split the examples by a predicate.
    ConditionalSplitter,
}

impl KnowledgeSource {
    pub const ORDER: [KnowledgeSource; 5] = [
        KnowledgeSource::ConstantDetector,
        KnowledgeSource::Projection,
        KnowledgeSource::SinglePrimitive,
        KnowledgeSource::Enumerator,
        KnowledgeSource::ConditionalSplitter,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    pub max_cost: u32,
    pub max_candidates: u64,
    pub timeout_ms: u64,
    /// Sources left out of this list do not run. Order within a tier is fixed.
    pub knowledge_sources: Vec<KnowledgeSource>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_cost: 12,
            max_candidates: 2_000_000,
            timeout_ms: 10_000,
            knowledge_sources: KnowledgeSource::ORDER.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statistics {
    pub candidates_expanded: u64,
    pub per_source: BTreeMap<KnowledgeSource, u64>,
    /// Highest cost tier the top-level search completed or entered.
    pub max_tier: u32,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub expr: Expr,
    pub cost: u32,
    pub stats: Statistics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "detail")]
pub enum FailureReason {
    BudgetExhausted,
    Timeout,
    /// Every expression up to the maximum cost was tried.
    SpaceExhausted,
    InvalidProblem(String),
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::BudgetExhausted => f.write_str("candidate budget exhausted"),
            FailureReason::Timeout => f.write_str("timed out"),
            FailureReason::SpaceExhausted => f.write_str("no program within the cost limit"),
            FailureReason::InvalidProblem(m) => write!(f, "invalid problem: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("synthesis failed: {reason}")]
pub struct Failure {
    pub reason: FailureReason,
    pub stats: Statistics,
}

/// Searches for the minimum-cost expression consistent with every example.
/// Ties are broken by the canonical text. The result is re-checked against
/// every example before it is returned.
pub fn synthesize(p: &SynthesisProblem, c: &SearchConfig) -> Result<Solution, Failure> {
    let started = Instant::now();
    if let Err(m) = p.check() {
        return Err(Failure {
            reason: FailureReason::InvalidProblem(m),
            stats: Statistics::default(),
        });
    }
    let (result, mut stats) = search::run(p, c, started);
    stats.elapsed_ms = started.elapsed().as_millis() as u64;
    match result {
        Ok(expr) => {
            let sound = p.cases.iter().all(|case| {
                eval(&expr, &case.inputs, p.imports.as_ref()).is_ok_and(|v| v == case.output)
            });
            assert!(sound, "synthesized {expr} does not replay its examples");
            Ok(Solution {
                cost: expr.cost(),
                expr,
                stats,
            })
        }
        Err(reason) => Err(Failure { reason, stats }),
    }
}
