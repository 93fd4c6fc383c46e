//! Built-in solver: exhaustive search over integer assignments with
//! `|v| ≤ bound` for the variables that propagation cannot determine.
//!
//! Equalities with a single unassigned variable are solved directly, so
//! chains of definitions cost nothing. Failures carry the set of decision
//! variables they depend on (conflict-directed backjumping); a failure that
//! never depended on cutting a domain at the bound is an exact `Unsat`,
//! otherwise the answer is `Unknown`.
//!
//! The bound is widened in stages (4, 16, 64, …, up to the configured
//! bound) under one shared node budget, so that small models are found
//! before the search commits to large values of an early variable.

use std::collections::{BTreeMap, BTreeSet};

use crate::heap::{ArithOp, LocId, Term};

use super::{Formula, Model, SatResult, Solver, SolverError};

#[derive(Clone, Debug)]
pub struct BoundedSolver {
    bound: i64,
    node_limit: u64,
}

impl Default for BoundedSolver {
    fn default() -> Self {
        BoundedSolver::new(Self::DEFAULT_BOUND)
    }
}

impl BoundedSolver {
    pub const DEFAULT_BOUND: i64 = 256;
    pub const DEFAULT_NODE_LIMIT: u64 = 200_000;

    pub fn new(bound: i64) -> BoundedSolver {
        BoundedSolver { bound: bound.max(0), node_limit: Self::DEFAULT_NODE_LIMIT }
    }

    pub fn with_node_limit(mut self, limit: u64) -> BoundedSolver {
        self.node_limit = limit;
        self
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }
}

impl Solver for BoundedSolver {
    fn name(&self) -> String {
        format!("builtin(bound={})", self.bound)
    }

    fn check(&mut self, vars: &BTreeSet<LocId>, f: &Formula) -> Result<SatResult, SolverError> {
        let mut search = Search { constraints: f.conjuncts(), bound: 0, nodes: 0, limit: self.node_limit };
        if search.constraints.iter().any(|c| matches!(c, Formula::False)) {
            return Ok(SatResult::Unsat);
        }
        for bound in stages(self.bound) {
            search.bound = bound;
            match search.run(Partial::default()) {
                Ok(partial) => {
                    let mut all = vars.clone();
                    f.collect_vars(&mut all);
                    let model: Model =
                        all.into_iter().map(|l| (l, partial.vals.get(&l).copied().unwrap_or(0))).collect();
                    debug_assert_eq!(f.eval(&model), Some(true), "bounded solver produced a non-model");
                    return Ok(SatResult::Sat(model));
                }
                Err(Fail::Conflict { limited: false, .. }) => return Ok(SatResult::Unsat),
                Err(Fail::Conflict { limited: true, .. }) => {}
                Err(Fail::Abort) => break,
            }
        }
        Ok(SatResult::Unknown)
    }
}

/// 4, 16, 64, … below `bound`, then `bound` itself.
fn stages(bound: i64) -> Vec<i64> {
    let mut out: Vec<i64> = std::iter::successors(Some(4i64), |b| b.checked_mul(4)).take_while(|b| *b < bound).collect();
    out.push(bound);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
    /// Division by zero or overflow under the current assignment.
    Undefined,
}

enum Val {
    Known(i64),
    Unknown,
    Undefined,
}

#[derive(Clone, Debug, Default)]
struct Partial {
    vals: BTreeMap<LocId, i64>,
    /// Decision variables each assigned variable depends on.
    reasons: BTreeMap<LocId, BTreeSet<LocId>>,
}

impl Partial {
    fn term(&self, t: &Term) -> Val {
        match t {
            Term::Const(n) => Val::Known(*n),
            Term::Loc(l) => self.vals.get(l).map_or(Val::Unknown, |v| Val::Known(*v)),
            Term::Bin(op, a, b) => match (self.term(a), self.term(b)) {
                (Val::Known(x), Val::Known(y)) => op.apply(x, y).map_or(Val::Undefined, Val::Known),
                (Val::Unknown, _) | (_, Val::Unknown) => Val::Unknown,
                _ => Val::Undefined,
            },
        }
    }

    fn formula(&self, f: &Formula) -> Tri {
        match f {
            Formula::True => Tri::True,
            Formula::False => Tri::False,
            Formula::Eq(a, b) if a == b && !matches!(a, Term::Bin(..)) => Tri::True,
            Formula::Eq(a, b) => match (self.term(a), self.term(b)) {
                (Val::Known(x), Val::Known(y)) => {
                    if x == y {
                        Tri::True
                    } else {
                        Tri::False
                    }
                }
                (Val::Unknown, _) | (_, Val::Unknown) => Tri::Unknown,
                _ => Tri::Undefined,
            },
            Formula::Not(g) => match self.formula(g) {
                Tri::True => Tri::False,
                Tri::False => Tri::True,
                t => t,
            },
            Formula::And(fs) => {
                let ts: Vec<Tri> = fs.iter().map(|g| self.formula(g)).collect();
                if ts.contains(&Tri::False) {
                    Tri::False
                } else if ts.contains(&Tri::Unknown) {
                    Tri::Unknown
                } else if ts.contains(&Tri::Undefined) {
                    Tri::Undefined
                } else {
                    Tri::True
                }
            }
            Formula::Or(fs) => {
                let ts: Vec<Tri> = fs.iter().map(|g| self.formula(g)).collect();
                if ts.contains(&Tri::True) {
                    Tri::True
                } else if ts.contains(&Tri::Unknown) {
                    Tri::Unknown
                } else if ts.contains(&Tri::Undefined) {
                    Tri::Undefined
                } else {
                    Tri::False
                }
            }
            Formula::Implies(a, b) => match (self.formula(a), self.formula(b)) {
                (Tri::False, _) | (_, Tri::True) => Tri::True,
                (Tri::True, t) => t,
                (Tri::Unknown, _) | (_, Tri::Unknown) => Tri::Unknown,
                _ => Tri::Undefined,
            },
        }
    }

    /// Decision variables behind the assigned variables of `f`.
    fn blame(&self, f: &Formula) -> BTreeSet<LocId> {
        let mut out = BTreeSet::new();
        for v in f.vars() {
            if let Some(r) = self.reasons.get(&v) {
                out.extend(r.iter().copied());
            }
        }
        out
    }

    fn assign(&mut self, x: LocId, v: i64, reasons: BTreeSet<LocId>) {
        self.vals.insert(x, v);
        self.reasons.insert(x, reasons);
    }
}

enum Fail {
    Conflict { vars: BTreeSet<LocId>, limited: bool },
    Abort,
}

enum Solved {
    Value(i64),
    NoSolution,
    Cannot,
}

fn occurrences(t: &Term, x: LocId) -> usize {
    match t {
        Term::Const(_) => 0,
        Term::Loc(l) => usize::from(*l == x),
        Term::Bin(_, a, b) => occurrences(a, x) + occurrences(b, x),
    }
}

/// Solve `t = target` for the single unknown `x` occurring once in `t`.
fn solve_for(p: &Partial, t: &Term, x: LocId, target: i64) -> Solved {
    let known = |t: &Term| match p.term(t) {
        Val::Known(v) => Some(v),
        _ => None,
    };
    match t {
        Term::Loc(l) if *l == x => Solved::Value(target),
        Term::Bin(op, a, b) => {
            let x_left = occurrences(a, x) > 0;
            let (inner, other) = if x_left { (a, b) } else { (b, a) };
            let Some(k) = known(other) else { return Solved::Cannot };
            let next = match op {
                ArithOp::Add => target.checked_sub(k),
                ArithOp::Sub if x_left => target.checked_add(k),
                ArithOp::Sub => k.checked_sub(target),
                ArithOp::Mul => {
                    if k == 0 {
                        return if target == 0 { Solved::Cannot } else { Solved::NoSolution };
                    }
                    if target % k != 0 {
                        return Solved::NoSolution;
                    }
                    Some(target / k)
                }
                ArithOp::Div => None,
            };
            match next {
                Some(n) => solve_for(p, inner, x, n),
                None => Solved::Cannot,
            }
        }
        _ => Solved::Cannot,
    }
}

struct Search<'f> {
    constraints: Vec<&'f Formula>,
    bound: i64,
    nodes: u64,
    limit: u64,
}

impl Search<'_> {
    /// An equation determined up to one variable in `f`, if any.
    fn unit(&self, p: &Partial, f: &Formula) -> Option<(LocId, Solved)> {
        match f {
            Formula::Eq(a, b) => {
                let mut vars = BTreeSet::new();
                a.locations(&mut vars);
                b.locations(&mut vars);
                let open: Vec<LocId> = vars.into_iter().filter(|v| !p.vals.contains_key(v)).collect();
                let [x] = open.as_slice() else { return None };
                let x = *x;
                let (in_a, in_b) = (occurrences(a, x), occurrences(b, x));
                let (side, other) = match (in_a, in_b) {
                    (1, 0) => (a, b),
                    (0, 1) => (b, a),
                    _ => return None,
                };
                let Val::Known(target) = p.term(other) else { return None };
                match solve_for(p, side, x, target) {
                    Solved::Cannot => None,
                    s => Some((x, s)),
                }
            }
            Formula::Implies(a, b) if p.formula(a) == Tri::True => self.unit(p, b),
            Formula::And(fs) => fs.iter().find_map(|g| self.unit(p, g)),
            _ => None,
        }
    }

    fn propagate(&self, p: &mut Partial) -> Result<(), Fail> {
        loop {
            let mut changed = false;
            for c in &self.constraints {
                match p.formula(c) {
                    Tri::True => {}
                    Tri::False => return Err(Fail::Conflict { vars: p.blame(c), limited: false }),
                    Tri::Undefined => return Err(Fail::Conflict { vars: p.blame(c), limited: true }),
                    Tri::Unknown => {
                        if let Some((x, s)) = self.unit(p, c) {
                            match s {
                                Solved::Value(v) => {
                                    let reasons = p.blame(c);
                                    p.assign(x, v, reasons);
                                    changed = true;
                                }
                                Solved::NoSolution => {
                                    return Err(Fail::Conflict { vars: p.blame(c), limited: false })
                                }
                                Solved::Cannot => {}
                            }
                        }
                    }
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn pick(&self, p: &Partial) -> Option<LocId> {
        let mut counts: BTreeMap<LocId, usize> = BTreeMap::new();
        for c in &self.constraints {
            if p.formula(c) == Tri::Unknown {
                for v in c.vars() {
                    if !p.vals.contains_key(&v) {
                        *counts.entry(v).or_default() += 1;
                    }
                }
            }
        }
        // Most frequent first; ties go to the lowest location.
        counts.into_iter().max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then(lb.cmp(la))).map(|(l, _)| l)
    }

    fn candidates(&self) -> impl Iterator<Item = i64> {
        let b = self.bound;
        std::iter::once(0).chain((1..=b).flat_map(|k| [k, -k]))
    }

    fn run(&mut self, mut p: Partial) -> Result<Partial, Fail> {
        self.propagate(&mut p)?;
        let Some(x) = self.pick(&p) else { return Ok(p) };
        let mut vars = BTreeSet::new();
        for v in self.candidates() {
            self.nodes += 1;
            if self.nodes > self.limit {
                return Err(Fail::Abort);
            }
            let mut next = p.clone();
            next.assign(x, v, [x].into_iter().collect());
            match self.run(next) {
                Ok(done) => return Ok(done),
                Err(Fail::Abort) => return Err(Fail::Abort),
                Err(Fail::Conflict { vars: c, limited }) => {
                    if !c.contains(&x) {
                        return Err(Fail::Conflict { vars: c, limited });
                    }
                    vars.extend(c.into_iter().filter(|v| *v != x));
                }
            }
        }
        // The domain of `x` was cut at the bound.
        Err(Fail::Conflict { vars, limited: true })
    }
}
