//! Bottom-up tiered search.
//!
//! A [`Bank`] holds every expression built so far, one per distinct vector of
//! values on the examples. Tier `c` builds all expressions of cost exactly
//! `c` from lower tiers. Expressions that fail on any example are dropped:
//! evaluation is strict everywhere except conditionals, and conditionals are
//! built separately by splitting the examples into sub-problems.

use std::cell::{Cell, RefCell};
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap, FxHasher};

use super::catalog::{Prim, Ty};
use super::eval::{call_import, Imports};
use super::expr::Expr;
use super::{FailureReason, KnowledgeSource, SearchConfig, Statistics, SynthesisProblem};
use crate::value::Value;

/// Conditionals nest at most this deep.
const MAX_SPLIT_DEPTH: u32 = 3;
/// The splitter only runs when the outputs take this many values or fewer.
const MAX_SPLIT_OUTPUTS: usize = 4;
const MAX_SPLIT_CASES: usize = 128;

#[derive(Debug)]
enum Stop {
    Budget,
    Timeout,
}

struct Shared<'a> {
    imports: &'a dyn Imports,
    calls: Vec<(String, usize)>,
    constants: Vec<Value>,
    enabled: [bool; 5],
    max_candidates: u64,
    deadline: Instant,
    used: Cell<u64>,
    per_source: RefCell<[u64; 5]>,
}

impl Shared<'_> {
    fn on(&self, ks: KnowledgeSource) -> bool {
        self.enabled[ks.index()]
    }

    fn spend(&self, ks: KnowledgeSource) -> Result<(), Stop> {
        let used = self.used.get() + 1;
        self.used.set(used);
        self.per_source.borrow_mut()[ks.index()] += 1;
        if used > self.max_candidates {
            return Err(Stop::Budget);
        }
        if used % 512 == 0 {
            self.check_time()?;
        }
        Ok(())
    }

    fn check_time(&self) -> Result<(), Stop> {
        if Instant::now() >= self.deadline {
            Err(Stop::Timeout)
        } else {
            Ok(())
        }
    }
}

pub(super) fn run(
    p: &SynthesisProblem,
    c: &SearchConfig,
    started: Instant,
) -> (Result<Expr, FailureReason>, Statistics) {
    let imports = p.imports.as_ref();
    let calls = imports
        .names()
        .into_iter()
        .filter_map(|n| imports.arity(&n).map(|a| (n, a)))
        .collect();
    let mut enabled = [false; 5];
    for ks in &c.knowledge_sources {
        enabled[ks.index()] = true;
    }
    let shared = Shared {
        imports,
        calls,
        constants: p.search_constants(),
        enabled,
        max_candidates: c.max_candidates,
        deadline: started + Duration::from_millis(c.timeout_ms),
        used: Cell::new(0),
        per_source: RefCell::new([0; 5]),
    };
    let inputs = p.cases.iter().map(|e| e.inputs.clone()).collect();
    let outputs = p.cases.iter().map(|e| e.output.clone()).collect();
    let mut top = Searcher::new(inputs, outputs, 0);
    let result = top.solve_up_to(c.max_cost, &shared);
    let per = shared.per_source.borrow();
    let stats = Statistics {
        candidates_expanded: shared.used.get(),
        per_source: KnowledgeSource::ORDER
            .iter()
            .map(|ks| (*ks, per[ks.index()]))
            .collect(),
        max_tier: top.tier,
        elapsed_ms: 0,
    };
    let result = match result {
        Ok(Some((_, e))) => Ok(e),
        Ok(None) => Err(FailureReason::SpaceExhausted),
        Err(Stop::Budget) => Err(FailureReason::BudgetExhausted),
        Err(Stop::Timeout) => Err(FailureReason::Timeout),
    };
    (result, stats)
}

struct Entry {
    expr: Expr,
    cost: u32,
    values: Vec<Value>,
    types: u16,
    canonical: Option<String>,
}

impl Entry {
    fn canonical(&mut self) -> &str {
        if self.canonical.is_none() {
            self.canonical = Some(self.expr.canonical());
        }
        self.canonical.as_deref().expect("just set")
    }
}

fn hash_values(values: &[Value]) -> u64 {
    let mut h = FxHasher::default();
    values.hash(&mut h);
    h.finish()
}

/// Expressions indexed by cost level and by the values they produce.
struct Bank {
    width: usize,
    entries: Vec<Entry>,
    levels: Vec<Vec<usize>>,
    typed: Vec<Vec<Vec<usize>>>,
    lookup: FxHashMap<u64, Vec<usize>>,
}

impl Bank {
    fn new(width: usize) -> Self {
        Bank {
            width,
            entries: Vec::new(),
            levels: vec![Vec::new()],
            typed: vec![vec![Vec::new(); Ty::ALL.len()]],
            lookup: FxHashMap::default(),
        }
    }

    fn find(&self, values: &[Value]) -> Option<usize> {
        self.lookup
            .get(&hash_values(values))?
            .iter()
            .copied()
            .find(|&i| self.entries[i].values == values)
    }

    /// Adds an expression of cost `cost` unless one with the same values is
    /// already known. Within one cost the canonically smaller expression wins.
    fn offer(&mut self, cost: u32, values: Vec<Value>, make: impl FnOnce(&Bank) -> Expr) {
        let h = hash_values(&values);
        if let Some(bucket) = self.lookup.get(&h) {
            if let Some(i) = bucket.iter().copied().find(|&i| self.entries[i].values == values) {
                if self.entries[i].cost == cost {
                    let expr = make(self);
                    let text = expr.canonical();
                    let e = &mut self.entries[i];
                    if text.as_str() < e.canonical() {
                        e.expr = expr;
                        e.canonical = Some(text);
                    }
                }
                return;
            }
        }
        let expr = make(self);
        let idx = self.entries.len();
        while self.levels.len() <= cost as usize {
            self.levels.push(Vec::new());
            self.typed.push(vec![Vec::new(); Ty::ALL.len()]);
        }
        self.levels[cost as usize].push(idx);
        self.lookup.entry(h).or_default().push(idx);
        self.entries.push(Entry {
            expr,
            cost,
            types: Ty::mask_of(&values),
            values,
            canonical: None,
        });
    }

    /// Builds the per-type index of a finished level.
    fn seal(&mut self, cost: u32) {
        let c = cost as usize;
        while self.levels.len() <= c {
            self.levels.push(Vec::new());
            self.typed.push(vec![Vec::new(); Ty::ALL.len()]);
        }
        for (t, ty) in Ty::ALL.iter().enumerate() {
            self.typed[c][t] = self.levels[c]
                .iter()
                .copied()
                .filter(|&i| self.entries[i].types & ty.bit() != 0)
                .collect();
        }
    }

    fn level(&self, cost: u32) -> &[usize] {
        self.levels.get(cost as usize).map_or(&[], Vec::as_slice)
    }

    fn typed(&self, cost: u32, ty: Ty) -> &[usize] {
        self.typed
            .get(cost as usize)
            .map_or(&[], |t| t[ty as usize].as_slice())
    }
}

fn apply_all(p: Prim, args: &[&[Value]], width: usize) -> Option<Vec<Value>> {
    let mut out = Vec::with_capacity(width);
    match args {
        [a] => {
            for x in a.iter() {
                out.push(p.apply(&[x]).ok()?);
            }
        }
        [a, b] => {
            for (x, y) in a.iter().zip(b.iter()) {
                out.push(p.apply(&[x, y]).ok()?);
            }
        }
        _ => return None,
    }
    Some(out)
}

/// All ways to write `total` as an ordered sum of `parts` positive integers.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..=total.saturating_sub(parts as u32 - 1) {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Builds level `c` of `bank` from primitives and imports, plus maps when
/// `bodies` is given.
fn grow(
    bank: &mut Bank,
    c: u32,
    sh: &Shared,
    inputs: &[Vec<Value>],
    bodies: Option<&mut BodyBanks>,
) -> Result<(), Stop> {
    use KnowledgeSource::{Enumerator, SinglePrimitive};
    let width = bank.width;
    for &p in Prim::ALL {
        let args = p.args();
        let needed = args.len() as u32;
        if c < needed + 1 {
            continue;
        }
        if args.len() == 1 {
            let ks = if c == 2 { SinglePrimitive } else { Enumerator };
            if !sh.on(ks) {
                continue;
            }
            let list = bank.typed(c - 1, args[0]).to_vec();
            for a in list {
                sh.spend(ks)?;
                let Some(values) = apply_all(p, &[&bank.entries[a].values], width) else {
                    continue;
                };
                bank.offer(c, values, |b| Expr::Apply(p, vec![b.entries[a].expr.clone()]));
            }
        } else {
            for c1 in 1..=c - 2 {
                let c2 = c - 1 - c1;
                if p.is_commutative() && c1 > c2 {
                    continue;
                }
                let ks = if c1 == 1 && c2 == 1 { SinglePrimitive } else { Enumerator };
                if !sh.on(ks) {
                    continue;
                }
                let l1 = bank.typed(c1, args[0]).to_vec();
                let l2 = bank.typed(c2, args[1]).to_vec();
                for &a in &l1 {
                    for &b in &l2 {
                        if p.is_commutative() && a > b {
                            continue;
                        }
                        sh.spend(ks)?;
                        let values = apply_all(
                            p,
                            &[&bank.entries[a].values, &bank.entries[b].values],
                            width,
                        );
                        let Some(values) = values else { continue };
                        bank.offer(c, values, |bk| {
                            Expr::Apply(p, vec![bk.entries[a].expr.clone(), bk.entries[b].expr.clone()])
                        });
                    }
                }
            }
        }
    }

    if sh.on(Enumerator) {
        for (name, arity) in &sh.calls {
            if *arity == 0 {
                continue;
            }
            for costs in compositions(c - 1, *arity) {
                let lists: Vec<Vec<usize>> = costs.iter().map(|&k| bank.level(k).to_vec()).collect();
                let mut pick = vec![0usize; *arity];
                if lists.iter().any(Vec::is_empty) {
                    continue;
                }
                loop {
                    let chosen: Vec<usize> = pick.iter().zip(&lists).map(|(&i, l)| l[i]).collect();
                    sh.spend(Enumerator)?;
                    let mut values = Vec::with_capacity(width);
                    let mut ok = true;
                    for row in 0..width {
                        let args: Vec<Value> =
                            chosen.iter().map(|&e| bank.entries[e].values[row].clone()).collect();
                        match call_import(sh.imports, name, &args) {
                            Ok(v) => values.push(v),
                            Err(_) => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        bank.offer(c, values, |b| {
                            Expr::CallImport(
                                name.clone(),
                                chosen.iter().map(|&e| b.entries[e].expr.clone()).collect(),
                            )
                        });
                    }
                    if !advance_odometer(&mut pick, &lists) {
                        break;
                    }
                }
            }
        }
    }

    if let Some(bodies) = bodies {
        if sh.on(Enumerator) && c >= 4 {
            for cl in 1..=c - 3 {
                let cb = c - 2 - cl;
                let lists = bank.typed(cl, Ty::List).to_vec();
                for l in lists {
                    let id = bodies.for_list(l, &bank.entries[l].values, inputs, sh)?;
                    bodies.ensure(id, cb, sh)?;
                    let body = &bodies.banks[id];
                    for &bi in body.bank.level(cb) {
                        sh.spend(Enumerator)?;
                        let out = &body.bank.entries[bi].values;
                        let values: Vec<Value> = bank.entries[l]
                            .values
                            .iter()
                            .enumerate()
                            .map(|(row, list)| {
                                Value::List(
                                    list.as_list()
                                        .expect("list-typed entry")
                                        .iter()
                                        .map(|el| out[body.pos[&(row, el.clone())]].clone())
                                        .collect(),
                                )
                            })
                            .collect();
                        bank.offer(c, values, |b| {
                            Expr::map(b.entries[l].expr.clone(), body.bank.entries[bi].expr.clone())
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

fn advance_odometer(pick: &mut [usize], lists: &[Vec<usize>]) -> bool {
    for i in (0..pick.len()).rev() {
        pick[i] += 1;
        if pick[i] < lists[i].len() {
            return true;
        }
        pick[i] = 0;
    }
    false
}

/// Banks of map bodies. A body bank has one row per distinct (example, list
/// element) pair; its leaves are the slot, the inputs and the constants.
#[derive(Default)]
struct BodyBanks {
    of_entry: FxHashMap<usize, usize>,
    by_rows: FxHashMap<u64, Vec<usize>>,
    banks: Vec<BodyBank>,
}

struct BodyBank {
    rows: Vec<(usize, Value)>,
    pos: FxHashMap<(usize, Value), usize>,
    bank: Bank,
    inputs: Vec<Vec<Value>>,
    built: u32,
}

impl BodyBanks {
    fn for_list(
        &mut self,
        entry: usize,
        lists: &[Value],
        inputs: &[Vec<Value>],
        sh: &Shared,
    ) -> Result<usize, Stop> {
        if let Some(&id) = self.of_entry.get(&entry) {
            return Ok(id);
        }
        let mut pos = FxHashMap::default();
        let mut rows: Vec<(usize, Value)> = Vec::new();
        for (case, l) in lists.iter().enumerate() {
            for el in l.as_list().expect("list-typed entry") {
                let key = (case, el.clone());
                if !pos.contains_key(&key) {
                    pos.insert(key.clone(), rows.len());
                    rows.push(key);
                }
            }
        }
        let h = {
            let mut h = FxHasher::default();
            rows.hash(&mut h);
            h.finish()
        };
        let existing = self
            .by_rows
            .get(&h)
            .and_then(|ids| ids.iter().copied().find(|&i| self.banks[i].rows == rows));
        let id = match existing {
            Some(id) => id,
            None => {
                let body_inputs: Vec<Vec<Value>> =
                    rows.iter().map(|(case, _)| inputs[*case].clone()).collect();
                let mut bank = Bank::new(rows.len());
                sh.spend(KnowledgeSource::Enumerator)?;
                bank.offer(1, rows.iter().map(|(_, el)| el.clone()).collect(), |_| Expr::Slot);
                let arity = inputs.first().map_or(0, Vec::len);
                for k in 0..arity {
                    sh.spend(KnowledgeSource::Enumerator)?;
                    let values = body_inputs.iter().map(|row| row[k].clone()).collect();
                    bank.offer(1, values, |_| Expr::Input(k));
                }
                for k in &sh.constants {
                    sh.spend(KnowledgeSource::Enumerator)?;
                    bank.offer(1, vec![k.clone(); rows.len()], |_| Expr::Const(k.clone()));
                }
                bank.seal(1);
                let id = self.banks.len();
                self.by_rows.entry(h).or_default().push(id);
                self.banks.push(BodyBank {
                    rows,
                    pos,
                    bank,
                    inputs: body_inputs,
                    built: 1,
                });
                id
            }
        };
        self.of_entry.insert(entry, id);
        Ok(id)
    }

    fn ensure(&mut self, id: usize, cost: u32, sh: &Shared) -> Result<(), Stop> {
        let b = &mut self.banks[id];
        while b.built < cost {
            let next = b.built + 1;
            grow(&mut b.bank, next, sh, &b.inputs, None)?;
            b.bank.seal(next);
            b.built = next;
        }
        Ok(())
    }
}

/// Search state for one set of examples. Conditionals spawn child searchers
/// for subsets of the examples.
struct Searcher {
    inputs: Vec<Vec<Value>>,
    outputs: Vec<Value>,
    depth: u32,
    distinct_outputs: usize,
    bank: Bank,
    bodies: BodyBanks,
    tier: u32,
    solution: Option<(u32, Expr)>,
    children: FxHashMap<u128, Searcher>,
}

impl Searcher {
    fn new(inputs: Vec<Vec<Value>>, outputs: Vec<Value>, depth: u32) -> Self {
        let mut distinct: Vec<&Value> = Vec::new();
        for o in &outputs {
            if !distinct.contains(&o) {
                distinct.push(o);
            }
        }
        Searcher {
            distinct_outputs: distinct.len(),
            bank: Bank::new(outputs.len()),
            inputs,
            outputs,
            depth,
            bodies: BodyBanks::default(),
            tier: 0,
            solution: None,
            children: FxHashMap::default(),
        }
    }

    fn width(&self) -> usize {
        self.outputs.len()
    }

    /// The cheapest solution if it costs at most `bound`.
    fn solve_up_to(&mut self, bound: u32, sh: &Shared) -> Result<Option<(u32, Expr)>, Stop> {
        loop {
            if let Some((cost, e)) = &self.solution {
                return Ok((*cost <= bound).then(|| (*cost, e.clone())));
            }
            if self.tier >= bound {
                return Ok(None);
            }
            sh.check_time()?;
            self.advance(sh)?;
        }
    }

    fn advance(&mut self, sh: &Shared) -> Result<(), Stop> {
        use KnowledgeSource::*;
        let c = self.tier + 1;
        let width = self.width();
        let mut found: Vec<Expr> = Vec::new();
        if c == 1 {
            let arity = self.inputs.first().map_or(0, Vec::len);
            for k in 0..arity {
                sh.spend(Projection)?;
                let values = self.inputs.iter().map(|row| row[k].clone()).collect();
                self.bank.offer(1, values, |_| Expr::Input(k));
            }
            for v in &sh.constants {
                sh.spend(ConstantDetector)?;
                self.bank.offer(1, vec![v.clone(); width], |_| Expr::Const(v.clone()));
            }
            for (name, arity) in &sh.calls {
                if *arity == 0 {
                    sh.spend(Enumerator)?;
                    if let Ok(v) = call_import(sh.imports, name, &[]) {
                        self.bank.offer(1, vec![v; width], |_| Expr::CallImport(name.clone(), vec![]));
                    }
                }
            }
            if sh.on(ConstantDetector) && self.distinct_outputs == 1 {
                found.push(Expr::Const(self.outputs[0].clone()));
            }
        } else {
            grow(&mut self.bank, c, sh, &self.inputs, Some(&mut self.bodies))?;
        }
        self.bank.seal(c);

        if let Some(i) = self.bank.find(&self.outputs) {
            let e = &self.bank.entries[i];
            let allowed = match e.expr {
                Expr::Input(_) => sh.on(Projection),
                _ => true,
            };
            if e.cost == c && allowed {
                found.push(e.expr.clone());
            }
        }
        found.extend(self.split(c, sh)?);

        self.tier = c;
        if let Some(best) = found.into_iter().min_by_key(Expr::canonical) {
            self.solution = Some((c, best));
        }
        Ok(())
    }

    /// Conditionals of cost exactly `c`: a predicate from the bank plus the
    /// cheapest solutions of the two example subsets it separates.
    fn split(&mut self, c: u32, sh: &Shared) -> Result<Vec<Expr>, Stop> {
        let n = self.width();
        if !sh.on(KnowledgeSource::ConditionalSplitter)
            || self.depth >= MAX_SPLIT_DEPTH
            || !(2..=MAX_SPLIT_CASES).contains(&n)
            || self.distinct_outputs > MAX_SPLIT_OUTPUTS
            || c < 5
        {
            return Ok(Vec::new());
        }
        let full: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        let mut preds = Vec::new();
        for cp in 1..=c - 4 {
            for &i in self.bank.typed(cp, Ty::Bool) {
                let mask = self.bank.entries[i]
                    .values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v == Value::Bool(true))
                    .fold(0u128, |m, (k, _)| m | (1u128 << k));
                if mask != 0 && mask != full {
                    preds.push((cp, i, mask));
                }
            }
        }
        let mut found = Vec::new();
        for (cp, i, mask) in preds {
            sh.spend(KnowledgeSource::ConditionalSplitter)?;
            let Some((ct, t)) = self.child(mask).solve_up_to(c - 3 - cp, sh)? else {
                continue;
            };
            if 2 + cp + ct + 1 > c {
                continue;
            }
            let Some((cf, f)) = self.child(!mask & full).solve_up_to(c - 2 - cp - ct, sh)? else {
                continue;
            };
            if 2 + cp + ct + cf == c {
                found.push(Expr::if_(self.bank.entries[i].expr.clone(), t, f));
            }
        }
        Ok(found)
    }

    fn child(&mut self, mask: u128) -> &mut Searcher {
        let (inputs, outputs, depth) = (&self.inputs, &self.outputs, self.depth);
        self.children.entry(mask).or_insert_with(|| {
            let keep = |k: &usize| mask & (1u128 << k) != 0;
            Searcher::new(
                (0..inputs.len()).filter(keep).map(|k| inputs[k].clone()).collect(),
                (0..outputs.len()).filter(keep).map(|k| outputs[k].clone()).collect(),
                depth + 1,
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::compositions;

    #[test]
    fn compositions_of_small_totals() {
        assert_eq!(compositions(3, 2), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(compositions(2, 3), Vec::<Vec<u32>>::new());
        assert_eq!(compositions(0, 0), vec![Vec::<u32>::new()]);
    }
}
