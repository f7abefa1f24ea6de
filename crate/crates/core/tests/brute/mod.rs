//! Exhaustive enumeration over the catalog, used as a minimality oracle, and a
//! sampler of solvable problems.
#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use zoea_core::synth::{eval, Example, Expr, NoImports, Prim, SynthesisProblem};
use zoea_core::value::Value;

/// Every expression of exactly `cost`, with no pruning. `slot` allows the map
/// slot as a leaf.
pub fn all_exprs(cost: u32, leaves: &[Expr], slot: bool) -> Vec<Expr> {
    let mut out = Vec::new();
    if cost == 1 {
        out.extend(leaves.iter().cloned());
        if slot {
            out.push(Expr::Slot);
        }
        return out;
    }
    for &p in Prim::ALL {
        match p.arity() {
            1 => {
                for a in all_exprs(cost - 1, leaves, slot) {
                    out.push(Expr::Apply(p, vec![a]));
                }
            }
            2 => {
                for c1 in 1..cost - 1 {
                    let left = all_exprs(c1, leaves, slot);
                    let right = all_exprs(cost - 1 - c1, leaves, slot);
                    for a in &left {
                        for b in &right {
                            out.push(Expr::Apply(p, vec![a.clone(), b.clone()]));
                        }
                    }
                }
            }
            _ => unreachable!("catalog has unary and binary primitives only"),
        }
    }
    if cost >= 4 {
        for cl in 1..cost - 2 {
            let lists = all_exprs(cl, leaves, slot);
            let bodies = all_exprs(cost - 2 - cl, leaves, true);
            for l in &lists {
                for b in &bodies {
                    out.push(Expr::map(l.clone(), b.clone()));
                }
            }
        }
    }
    out
}

/// Inputs and search constants, plus the shared output when every case agrees.
pub fn leaves(p: &SynthesisProblem) -> Vec<Expr> {
    let mut constants = p.search_constants();
    if let Some(first) = p.cases.first() {
        if p.cases.iter().all(|c| c.output == first.output) && !constants.contains(&first.output) {
            constants.push(first.output.clone());
        }
    }
    (0..p.arity())
        .map(Expr::Input)
        .chain(constants.into_iter().map(Expr::Const))
        .collect()
}

pub fn solves(e: &Expr, p: &SynthesisProblem) -> bool {
    p.cases
        .iter()
        .all(|c| eval(e, &c.inputs, &NoImports).is_ok_and(|v| v == c.output))
}

/// All solutions of exactly `cost`.
pub fn solutions_at(cost: u32, p: &SynthesisProblem) -> Vec<Expr> {
    all_exprs(cost, &leaves(p), false)
        .into_iter()
        .filter(|e| solves(e, p))
        .collect()
}

/// Rewrites arguments of commutative primitives into canonical order.
pub fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::Apply(p, args) => {
            let mut args: Vec<Expr> = args.iter().map(normalize).collect();
            if p.is_commutative() {
                args.sort_by_key(Expr::canonical);
            }
            Expr::Apply(*p, args)
        }
        Expr::If(a, b, c) => Expr::if_(normalize(a), normalize(b), normalize(c)),
        Expr::MapOver(l, b) => Expr::map(normalize(l), normalize(b)),
        Expr::CallImport(n, args) => Expr::CallImport(n.clone(), args.iter().map(normalize).collect()),
        other => other.clone(),
    }
}

fn word(rng: &mut StdRng) -> String {
    const WORDS: [&str; 10] = ["ab", "Cat", "dog", "x", "", "Hello", "b a", "zz", "Q", "mid"];
    WORDS.choose(rng).unwrap().to_string()
}

#[derive(Clone, Copy)]
enum Kind {
    Number,
    Text,
    Numbers,
    Texts,
}

fn sample_value(kind: Kind, rng: &mut StdRng) -> Value {
    match kind {
        Kind::Number => Value::int(rng.gen_range(-9..=20)),
        Kind::Text => Value::text(word(rng)),
        Kind::Numbers => {
            let n = rng.gen_range(1..=4);
            Value::list((0..n).map(|_| Value::int(rng.gen_range(-5..=9))))
        }
        Kind::Texts => {
            let n = rng.gen_range(1..=3);
            Value::list((0..n).map(|_| Value::text(word(rng))))
        }
    }
}

fn sample_expr(cost: u32, arity: usize, pool: &[Value], rng: &mut StdRng) -> Expr {
    let leaf = |rng: &mut StdRng| {
        if rng.gen_bool(0.7) {
            Expr::Input(rng.gen_range(0..arity))
        } else {
            Expr::Const(pool.choose(rng).unwrap().clone())
        }
    };
    if cost <= 1 {
        return leaf(rng);
    }
    if cost >= 4 && rng.gen_bool(0.15) {
        let body = if rng.gen_bool(0.5) {
            Expr::Apply(
                *[Prim::Add, Prim::Concat, Prim::Mul].choose(rng).unwrap(),
                vec![Expr::Slot, leaf(rng)],
            )
        } else {
            Expr::Apply(*[Prim::Neg, Prim::Uppercase, Prim::StrLength].choose(rng).unwrap(), vec![Expr::Slot])
        };
        let list = Expr::Input(rng.gen_range(0..arity));
        return Expr::map(list, body);
    }
    let p = *Prim::ALL.choose(rng).unwrap();
    if p.arity() == 1 || cost == 2 {
        let p = *Prim::ALL.iter().filter(|p| p.arity() == 1).collect::<Vec<_>>().choose(rng).unwrap();
        return Expr::Apply(*p, vec![sample_expr(cost - 1, arity, pool, rng)]);
    }
    let c1 = rng.gen_range(1..cost - 1);
    Expr::Apply(
        p,
        vec![
            sample_expr(c1, arity, pool, rng),
            sample_expr(cost - 1 - c1, arity, pool, rng),
        ],
    )
}

/// A problem whose cases come from evaluating a random program of cost at most
/// 4 on random inputs. Returns the program as well.
pub fn sample_problem(rng: &mut StdRng) -> (SynthesisProblem, Expr) {
    let pool = vec![Value::int(2), Value::text("-"), Value::text("a")];
    loop {
        let arity = rng.gen_range(1..=2);
        let kinds: Vec<Kind> = (0..arity)
            .map(|_| *[Kind::Number, Kind::Text, Kind::Numbers, Kind::Texts].choose(rng).unwrap())
            .collect();
        let cost = rng.gen_range(1..=4);
        let program = sample_expr(cost, arity, &pool, rng);
        let n = rng.gen_range(3..=5);
        let mut cases = Vec::new();
        for _ in 0..n {
            let inputs: Vec<Value> = kinds.iter().map(|k| sample_value(*k, rng)).collect();
            match eval(&program, &inputs, &NoImports) {
                Ok(out) => cases.push(Example::new(inputs, out)),
                Err(_) => break,
            }
        }
        if cases.len() == n {
            return (SynthesisProblem::new(cases).with_constants(pool), program);
        }
    }
}
