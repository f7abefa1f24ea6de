//! Compiles each problem with and without its dependencies and compares
//! search effort.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use zoea_core::compile::compile_document;
use zoea_core::graph::{Document, ElementId, Shape};
use zoea_core::synth::{Imports, SearchConfig};
use zoea_core::value::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measure {
    pub candidates: u64,
    /// Median wall time over the repeats, in milliseconds.
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub problem: String,
    /// `None` when the compile failed.
    pub with_deps: Option<Measure>,
    pub without: Option<Measure>,
}

impl BenchRow {
    pub fn solved_both_ways(&self) -> bool {
        self.with_deps.is_some() && self.without.is_some()
    }

    /// True when dependencies made the search larger.
    pub fn violates(&self) -> bool {
        matches!((self.with_deps, self.without), (Some(w), Some(wo)) if w.candidates > wo.candidates)
    }

    fn status(&self) -> &'static str {
        match (self.with_deps, self.without) {
            (None, None) => "unsolvable-both",
            (None, _) => "unsolvable-with-deps",
            (_, None) => "unsolvable-without",
            _ if self.violates() => "more-candidates-with-deps",
            _ => "ok",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

impl BenchReport {
    /// Rows solved both ways, the only ones the comparison covers.
    pub fn compared(&self) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(|r| r.solved_both_ways())
    }

    pub fn excluded(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| !r.solved_both_ways())
            .map(|r| r.problem.as_str())
            .collect()
    }

    pub fn violations(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.violates()).map(|r| r.problem.as_str()).collect()
    }

    /// Median over compared problems of (with, without) wall times.
    pub fn median_ms(&self) -> (f64, f64) {
        let mut with: Vec<f64> = self.compared().map(|r| r.with_deps.unwrap().ms).collect();
        let mut without: Vec<f64> = self.compared().map(|r| r.without.unwrap().ms).collect();
        (median(&mut with), median(&mut without))
    }

    pub fn total_candidates(&self) -> (u64, u64) {
        self.compared().fold((0, 0), |(a, b), r| {
            (a + r.with_deps.unwrap().candidates, b + r.without.unwrap().candidates)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["problem", "with_candidates", "with_ms", "without_candidates", "without_ms", "status"])
            .expect("in-memory write");
        let cell = |m: Option<Measure>| match m {
            Some(m) => (m.candidates.to_string(), format!("{:.3}", m.ms)),
            None => (String::new(), String::new()),
        };
        for r in &self.rows {
            let (wc, wm) = cell(r.with_deps);
            let (oc, om) = cell(r.without);
            w.write_record([r.problem.as_str(), &wc, &wm, &oc, &om, r.status()])
                .expect("in-memory write");
        }
        let (wc, oc) = self.total_candidates();
        let (wm, om) = self.median_ms();
        w.write_record([
            "summary",
            &wc.to_string(),
            &format!("{wm:.3}"),
            &oc.to_string(),
            &format!("{om:.3}"),
            if self.violations().is_empty() { "ok" } else { "violations" },
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.problem.len()).max().unwrap_or(7).max(7);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>12} {:>10}  {:>12} {:>10}  status",
            "problem", "with deps", "ms", "without", "ms"
        );
        let cell = |m: Option<Measure>| match m {
            Some(m) => (m.candidates.to_string(), format!("{:.1}", m.ms)),
            None => ("-".into(), "-".into()),
        };
        for r in &self.rows {
            let (wc, wm) = cell(r.with_deps);
            let (oc, om) = cell(r.without);
            let _ = writeln!(out, "{:<width$}  {wc:>12} {wm:>10}  {oc:>12} {om:>10}  {}", r.problem, r.status());
        }
        let (wc, oc) = self.total_candidates();
        let (wm, om) = self.median_ms();
        let _ = writeln!(
            out,
            "{:<width$}  {wc:>12} {wm:>10.1}  {oc:>12} {om:>10.1}  total candidates, median ms",
            "summary"
        );
        let excluded = self.excluded();
        if !excluded.is_empty() {
            let _ = writeln!(out, "excluded (not solvable both ways): {}", excluded.join(", "));
        }
        out
    }
}

/// The document with every dependency removed, so each target reads all
/// earlier columns.
pub fn without_dependencies(d: &Document) -> Document {
    let mut d = d.clone();
    for case in &mut d.cases {
        case.dependencies.clear();
    }
    d
}

fn measure(d: &Document, config: &SearchConfig, imports: &Arc<dyn Imports>, repeat: usize) -> Option<Measure> {
    let mut times = Vec::with_capacity(repeat);
    let mut candidates = 0;
    for _ in 0..repeat.max(1) {
        let started = Instant::now();
        let compiled = compile_document(d, config, imports.clone(), &mut |_| {}).ok()?;
        times.push(started.elapsed().as_secs_f64() * 1000.0);
        candidates = compiled.candidates_expanded();
    }
    Some(Measure {
        candidates,
        ms: median(&mut times),
    })
}

/// Runs every problem both ways, `repeat` times each, keeping the median time.
pub fn run_bench(
    problems: &[Document],
    config: &SearchConfig,
    imports: Arc<dyn Imports>,
    repeat: usize,
    mut progress: impl FnMut(&BenchRow),
) -> BenchReport {
    let rows = problems
        .iter()
        .map(|d| {
            let row = BenchRow {
                problem: d.name.clone(),
                with_deps: measure(d, config, &imports, repeat),
                without: measure(&without_dependencies(d), config, &imports, repeat),
            };
            progress(&row);
            row
        })
        .collect();
    BenchReport { rows }
}

/// Reads every `*.json` document in a directory, sorted by file name.
pub fn load_suite(dir: &Path) -> anyhow::Result<Vec<Document>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|x| x.to_str()) == Some("json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Document::from_json(&text).with_context(|| format!("loading {}", p.display()))
        })
        .collect()
}

/// A multi-step problem: per case, input values, derive values (one derive
/// column each) and one output. `deps` lists (target, sources) by position,
/// where position 0.. runs over inputs, then derives, then the output.
/// Distractor inputs are added after the listed ones.
struct Problem<'a> {
    name: &'a str,
    cases: Vec<(Vec<Value>, Vec<Value>, Value)>,
    deps: &'a [(usize, &'a [usize])],
}

/// Distractor inputs appended to every problem: values no step needs, which
/// only the dependencies rule out.
fn distractors(case: usize) -> Vec<Value> {
    let k = case as i64;
    vec![
        n(10 + 7 * k),
        n(3 - 4 * k),
        t(["left", "Right", "mid"][case % 3]),
        t(["  a", "b ", "Cc"][case % 3]),
        l(&[k, 2 * k + 1]),
    ]
}

fn build(mut p: Problem) -> Document {
    let own = p.cases[0].0.len();
    for (k, case) in p.cases.iter_mut().enumerate() {
        case.0.extend(distractors(k));
    }
    let shift = p.cases[0].0.len() - own;
    let at = |pos: usize| if pos < own { pos } else { pos + shift };
    let deps: Vec<(usize, Vec<usize>)> = p
        .deps
        .iter()
        .map(|(target, sources)| (at(*target), sources.iter().map(|s| at(*s)).collect()))
        .collect();
    let mut d = Document::new(p.name);
    let (inputs, derives, _) = &p.cases[0];
    let (n_in, n_der) = (inputs.len(), derives.len());
    for k in 0..n_der {
        d.add_derive_column("1", 2 + k).unwrap();
    }
    let column_of = |pos: usize| if pos < n_in { 1 } else { 1 + pos - n_in + 1 };
    let values = |c: &(Vec<Value>, Vec<Value>, Value)| -> Vec<Value> {
        c.0.iter().chain(&c.1).chain([&c.2]).cloned().collect()
    };
    let first = values(&p.cases[0]);
    let ids: Vec<ElementId> = first
        .iter()
        .enumerate()
        .map(|(pos, v)| d.add_element("1", column_of(pos), Shape::of_kind(v.kind()), v.clone()).unwrap())
        .collect();
    for (target, sources) in &deps {
        d.add_dependency("1", sources.iter().map(|s| ids[*s]), ids[*target]).unwrap();
    }
    for case in &p.cases[1..] {
        let id = d.clone_case("1").unwrap();
        let k = d.case_index(&id).unwrap();
        // Clone order is column order, which is position order.
        let fresh: Vec<ElementId> = d.cases[k].elements().map(|e| e.id).collect();
        for (e, v) in fresh.into_iter().zip(values(case)) {
            d.set_value(e, v).unwrap();
        }
    }
    d
}

fn n(x: i64) -> Value {
    Value::int(x)
}

fn t(s: &str) -> Value {
    Value::text(s)
}

fn l(xs: &[i64]) -> Value {
    Value::list(xs.iter().map(|x| Value::int(*x)))
}

fn lt(xs: &[&str]) -> Value {
    Value::list(xs.iter().map(|x| Value::text(*x)))
}

/// Ten problems of two or three steps, each with inputs that the
/// dependencies mark as irrelevant to some step.
pub fn builtin_suite() -> Vec<Document> {
    vec![
        build(Problem {
            name: "product_plus_one",
            cases: vec![
                (vec![n(2), n(3), t("x")], vec![n(6)], n(7)),
                (vec![n(4), n(5), t("y")], vec![n(20)], n(21)),
                (vec![n(-1), n(7), t("")], vec![n(-7)], n(-6)),
            ],
            deps: &[(3, &[0, 1]), (4, &[3])],
        }),
        build(Problem {
            name: "shout_twice",
            cases: vec![
                (vec![t("hi"), n(3)], vec![t("HI")], t("HIHI")),
                (vec![t("go"), n(0)], vec![t("GO")], t("GOGO")),
                (vec![t("abc"), n(9)], vec![t("ABC")], t("ABCABC")),
            ],
            deps: &[(2, &[0]), (3, &[2])],
        }),
        build(Problem {
            name: "smallest",
            cases: vec![
                (vec![l(&[3, 1, 2]), n(5)], vec![l(&[1, 2, 3])], n(1)),
                (vec![l(&[9, 7]), n(1)], vec![l(&[7, 9])], n(7)),
                (vec![l(&[4, 8, 6, 5]), n(2)], vec![l(&[4, 5, 6, 8])], n(4)),
            ],
            deps: &[(2, &[0]), (3, &[2])],
        }),
        build(Problem {
            name: "trimmed_lower",
            cases: vec![
                (vec![t("  Hello "), t("z")], vec![t("Hello")], t("hello")),
                (vec![t("ABC  "), t("q")], vec![t("ABC")], t("abc")),
                (vec![t(" MiXed"), t("")], vec![t("MiXed")], t("mixed")),
            ],
            deps: &[(2, &[0]), (3, &[2])],
        }),
        build(Problem {
            name: "sum_times",
            cases: vec![
                (vec![n(1), n(2), n(3)], vec![n(3)], n(9)),
                (vec![n(4), n(1), n(2)], vec![n(5)], n(10)),
                (vec![n(0), n(6), n(5)], vec![n(6)], n(30)),
            ],
            deps: &[(3, &[0, 1]), (4, &[3, 2])],
        }),
        build(Problem {
            name: "joined_length",
            cases: vec![
                (vec![lt(&["a", "bc"]), t("-"), n(4)], vec![t("a-bc")], n(4)),
                (vec![lt(&["xyz", "w", "v"]), t("+"), n(0)], vec![t("xyz+w+v")], n(7)),
                (vec![lt(&["q"]), t("::"), n(2)], vec![t("q")], n(1)),
            ],
            deps: &[(3, &[0, 1]), (4, &[3])],
        }),
        build(Problem {
            name: "larger_squared",
            cases: vec![
                (vec![n(2), n(5), n(1)], vec![n(5)], n(25)),
                (vec![n(-3), n(-4), n(8)], vec![n(-3)], n(9)),
                (vec![n(6), n(0), n(2)], vec![n(6)], n(36)),
            ],
            deps: &[(3, &[0, 1]), (4, &[3])],
        }),
        build(Problem {
            name: "mirror",
            cases: vec![
                (vec![t("ab"), n(1)], vec![t("ba")], t("baab")),
                (vec![t("xyz"), n(2)], vec![t("zyx")], t("zyxxyz")),
                (vec![t("q"), n(3)], vec![t("q")], t("qq")),
            ],
            deps: &[(2, &[0]), (3, &[2, 0])],
        }),
        build(Problem {
            name: "distinct_count",
            cases: vec![
                (vec![l(&[1, 1, 2]), t("a"), n(3)], vec![l(&[1, 2])], n(2)),
                (vec![l(&[5, 5, 5, 5]), t("b"), n(0)], vec![l(&[5])], n(1)),
                (vec![l(&[3, 4, 3, 6]), t(""), n(9)], vec![l(&[3, 4, 6])], n(3)),
            ],
            deps: &[(3, &[0]), (4, &[3])],
        }),
        build(Problem {
            name: "three_steps",
            cases: vec![
                (vec![n(1), n(2), t("u")], vec![n(3), n(9)], n(8)),
                (vec![n(2), n(2), t("v")], vec![n(4), n(16)], n(15)),
                (vec![n(-5), n(3), t("w")], vec![n(-2), n(4)], n(3)),
            ],
            deps: &[(3, &[0, 1]), (4, &[3]), (5, &[4])],
        }),
    ]
}
