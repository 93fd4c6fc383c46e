//! Bounded search for a location correspondence showing that a concrete
//! state instantiates an abstract one.
//!
//! The correspondence `F` maps abstract locations to concrete ones and is
//! built up from the expressions of the two states and from the locations
//! of source opaques. Only the part of the abstract heap reachable from
//! those seeds is related. Premises that need the concrete program to run
//! (case-map entries) are discharged by stepping the concrete state under
//! the given budget.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::heap::{Heap, LocId, Storeable};
use crate::logic::{BoundedSolver, Prover};
use crate::machine::{compute_labels, step, State};
use crate::syntax::{Expr, Label, Type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstantiationWitness {
    /// Abstract location to concrete location.
    pub f: BTreeMap<LocId, LocId>,
    /// Concrete transitions taken while discharging premises.
    pub checked_depth: u64,
}

/// Failure to exhibit a witness. None of these refute the relation: the
/// checker is a bounded semi-decision procedure.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum NoWitness {
    #[error("states do not correspond: {0}")]
    Mismatch(String),
    #[error("no correspondence found within {0} steps")]
    Budget(u64),
    #[error("abstract location {0} is needed but never related")]
    Unrelated(LocId),
}

/// The concrete initial state for `root` with each source opaque replaced
/// by its binding. Bindings must be closed values.
pub fn instantiate(root: &Expr, bindings: &BTreeMap<Label, Expr>) -> State {
    let mut heap = Heap::new();
    let mut locs = BTreeMap::new();
    for (label, v) in bindings {
        let s = match v {
            Expr::Lit(n) => Storeable::Int(*n),
            Expr::Lam { param, ty, body } => Storeable::Lam { param: param.clone(), ty: ty.clone(), body: (**body).clone() },
            other => panic!("binding for {label} is not a value: {other}"),
        };
        locs.insert(*label, Expr::Loc(heap.alloc_instance(*label, s)));
    }
    State::new(root.plug_opaques(&locs), heap)
}

struct Checker<'k> {
    abs: &'k Heap,
    conc: Heap,
    known: &'k BTreeSet<Label>,
    budget: u64,
    used: u64,
    f: BTreeMap<LocId, LocId>,
    pending: Vec<(LocId, LocId)>,
    /// Case entries `(input, output)` of the abstract map related to the
    /// concrete function at the third component.
    cases: Vec<(LocId, LocId, LocId)>,
    /// Refined abstract base opaques and their concrete counterparts.
    preds: Vec<(LocId, LocId)>,
}

fn free_vars(e: &Expr) -> BTreeSet<String> {
    fn go(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match e {
            Expr::Var(x) if !bound.contains(x) => {
                out.insert(x.clone());
            }
            Expr::Lam { param, body, .. } => {
                bound.push(param.clone());
                go(body, bound, out);
                bound.pop();
            }
            Expr::App(a, b) => {
                go(a, bound, out);
                go(b, bound, out);
            }
            Expr::If(c, t, f) => {
                go(c, bound, out);
                go(t, bound, out);
                go(f, bound, out);
            }
            Expr::Prim { args, .. } => args.iter().for_each(|a| go(a, bound, out)),
            _ => {}
        }
    }
    let mut out = BTreeSet::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

impl Checker<'_> {
    fn mismatch<T>(&self, what: String) -> Result<T, NoWitness> {
        Err(NoWitness::Mismatch(what))
    }

    fn unknown_only(&self, e: &Expr) -> Result<(), NoWitness> {
        let labels = compute_labels(&self.conc, e);
        match labels.intersection(self.known).next() {
            Some(l) => self.mismatch(format!("`{e}` can reach known site {l}")),
            None => Ok(()),
        }
    }

    fn pair(&mut self, a: LocId, c: LocId) -> Result<(), NoWitness> {
        match self.f.get(&a) {
            Some(prev) if *prev == c => Ok(()),
            Some(prev) => self.mismatch(format!("{a} would stand for both {prev} and {c}")),
            None => {
                self.f.insert(a, c);
                self.pending.push((a, c));
                Ok(())
            }
        }
    }

    fn match_expr(&mut self, c: &Expr, a: &Expr, binders: &mut Vec<(String, String)>) -> Result<(), NoWitness> {
        match (c, a) {
            (_, Expr::Opq { label, .. }) => match self.abs.opaque_loc(*label) {
                Some(la) => self.match_expr(c, &Expr::Loc(la), binders),
                None => self.unknown_only(c),
            },
            (Expr::Loc(lc), Expr::Loc(la)) => self.pair(*la, *lc),
            (Expr::Lit(_) | Expr::Lam { .. }, Expr::Loc(la)) => {
                if !free_vars(c).is_empty() {
                    return self.mismatch(format!("open term `{c}` against {la}"));
                }
                let s = match c {
                    Expr::Lit(n) => Storeable::Int(*n),
                    Expr::Lam { param, ty, body } => {
                        Storeable::Lam { param: param.clone(), ty: ty.clone(), body: (**body).clone() }
                    }
                    _ => unreachable!(),
                };
                let lc = self.conc.alloc(s);
                self.pair(*la, lc)
            }
            (Expr::Lit(n), Expr::Lit(m)) if n == m => Ok(()),
            (Expr::Var(x), Expr::Var(y)) => {
                let ok = match binders.iter().rev().find(|(cx, _)| cx == x) {
                    Some((_, ay)) => ay == y,
                    None => x == y && !binders.iter().any(|(_, ay)| ay == y),
                };
                if ok {
                    Ok(())
                } else {
                    self.mismatch(format!("variable {x} against {y}"))
                }
            }
            (Expr::Lam { param: p1, ty: t1, body: b1 }, Expr::Lam { param: p2, ty: t2, body: b2 }) if t1 == t2 => {
                binders.push((p1.clone(), p2.clone()));
                let r = self.match_expr(b1, b2, binders);
                binders.pop();
                r
            }
            (Expr::App(f1, a1), Expr::App(f2, a2)) => {
                self.match_expr(f1, f2, binders)?;
                self.match_expr(a1, a2, binders)
            }
            (Expr::If(c1, t1, e1), Expr::If(c2, t2, e2)) => {
                self.match_expr(c1, c2, binders)?;
                self.match_expr(t1, t2, binders)?;
                self.match_expr(e1, e2, binders)
            }
            (Expr::Prim { op: o1, args: a1, label: l1 }, Expr::Prim { op: o2, args: a2, label: l2 })
                if o1 == o2 && l1 == l2 && a1.len() == a2.len() =>
            {
                for (x, y) in a1.iter().zip(a2) {
                    self.match_expr(x, y, binders)?;
                }
                Ok(())
            }
            (Expr::Err { label: l1, op: o1 }, Expr::Err { label: l2, op: o2 }) if l1 == l2 && o1 == o2 => Ok(()),
            _ => self.mismatch(format!("`{c}` against `{a}`")),
        }
    }

    fn relate(&mut self, a: LocId, c: LocId) -> Result<(), NoWitness> {
        let Some(sa) = self.abs.get(a) else { return Err(NoWitness::Unrelated(a)) };
        let Some(sc) = self.conc.get(c).cloned() else {
            return self.mismatch(format!("dangling concrete location {c}"));
        };
        match (sa, &sc) {
            (Storeable::Int(n), Storeable::Int(m)) if n == m => Ok(()),
            (Storeable::Opaque { ty: Type::Int, preds }, Storeable::Int(_)) => {
                if !preds.is_empty() {
                    self.preds.push((a, c));
                }
                Ok(())
            }
            (Storeable::Opaque { ty: Type::Arrow(..), .. }, Storeable::Lam { .. }) => self.unknown_only(&Expr::Loc(c)),
            (Storeable::Lam { param: p1, ty: t1, body: b1 }, Storeable::Lam { param: p2, ty: t2, body: b2 })
                if t1 == t2 =>
            {
                let mut binders = vec![(p2.clone(), p1.clone())];
                self.match_expr(b2, b1, &mut binders)
            }
            (Storeable::Case { entries, .. }, Storeable::Lam { .. }) => {
                self.unknown_only(&Expr::Loc(c))?;
                for (i, o) in entries {
                    self.cases.push((*i, *o, c));
                }
                Ok(())
            }
            _ => self.mismatch(format!("{a} ↦ {sa} against {c} ↦ {sc}")),
        }
    }

    /// Run the concrete state to an answer location.
    fn run(&mut self, e: Expr) -> Result<LocId, NoWitness> {
        let mut prover = Prover::new(BoundedSolver::default());
        let mut s = State::new(e, std::mem::take(&mut self.conc));
        loop {
            match &s.expr {
                Expr::Loc(l) => {
                    let l = *l;
                    self.conc = s.heap;
                    return Ok(l);
                }
                Expr::Err { label, op } => {
                    let msg = format!("instance application fails with {op} at {label}");
                    self.conc = s.heap;
                    return self.mismatch(msg);
                }
                _ => {}
            }
            if self.used >= self.budget {
                self.conc = s.heap;
                return Err(NoWitness::Budget(self.budget));
            }
            self.used += 1;
            let next = step(&mut prover, &s).map_err(|e| NoWitness::Mismatch(e.to_string()))?;
            match <[_; 1]>::try_from(next) {
                Ok([(n, _)]) => s = n,
                Err(v) => return self.mismatch(format!("concrete state has {} successors", v.len())),
            }
        }
    }

    fn solve(&mut self) -> Result<(), NoWitness> {
        loop {
            while let Some((a, c)) = self.pending.pop() {
                self.relate(a, c)?;
            }
            let ready = self.cases.iter().position(|(i, _, _)| self.f.contains_key(i));
            let Some(ix) = ready else { break };
            let (i, o, func) = self.cases.remove(ix);
            let arg = self.f[&i];
            let Some(Storeable::Lam { param, body, .. }) = self.conc.get(func).cloned() else {
                return self.mismatch(format!("{func} is not a function"));
            };
            let out = self.run(body.subst(&param, arg))?;
            self.pair(o, out)?;
        }
        if let Some((i, _, _)) = self.cases.first() {
            return Err(NoWitness::Unrelated(*i));
        }
        for (a, c) in std::mem::take(&mut self.preds) {
            let n = self.conc.int_at(c).expect("related to an integer");
            let Some(Storeable::Opaque { preds, .. }) = self.abs.get(a) else { unreachable!() };
            for p in preds {
                let lookup = |m: LocId| self.f.get(&m).and_then(|mc| self.conc.int_at(*mc));
                match p.holds(n, &lookup) {
                    Some(true) => {}
                    Some(false) => return self.mismatch(format!("{c} does not satisfy {p} of {a}")),
                    None => {
                        let mut locs = BTreeSet::new();
                        p.locations(&mut locs);
                        let missing = locs.into_iter().find(|m| lookup(*m).is_none()).unwrap_or(a);
                        return Err(NoWitness::Unrelated(missing));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Look for `F` with `concrete ⊑ᶠ abstract`, relative to the known
/// labels. `budget` bounds the concrete steps taken to discharge premises.
pub fn check_instantiation(
    concrete: &State,
    abstract_: &State,
    known: &BTreeSet<Label>,
    budget: u64,
) -> Result<InstantiationWitness, NoWitness> {
    let mut ck = Checker {
        abs: &abstract_.heap,
        conc: concrete.heap.clone(),
        known,
        budget,
        used: 0,
        f: BTreeMap::new(),
        pending: Vec::new(),
        cases: Vec::new(),
        preds: Vec::new(),
    };

    match (&concrete.expr, &abstract_.expr) {
        // Errors from unknown code are ignored.
        (Expr::Err { label, .. }, _) if !known.contains(label) => {
            return Ok(InstantiationWitness { f: BTreeMap::new(), checked_depth: 0 });
        }
        // A concrete computation inside an instantiated opaque function.
        (c, Expr::App(f, _))
            if !c.is_answer()
                && matches!(&**f, Expr::Loc(lf) if matches!(ck.abs.get(*lf), Some(Storeable::Opaque { ty: Type::Arrow(..), .. }))) =>
        {
            ck.unknown_only(c)?;
        }
        (c, a) => ck.match_expr(c, a, &mut Vec::new())?,
    }
    for (label, la) in abstract_.heap.opaque_locs() {
        if let Some(lc) = concrete.heap.opaque_loc(*label) {
            ck.pair(*la, lc)?;
        }
    }
    ck.solve()?;
    Ok(InstantiationWitness { f: ck.f, checked_depth: ck.used })
}
