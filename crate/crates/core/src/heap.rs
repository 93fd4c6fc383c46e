//! The path condition: a heap of concrete values, lambdas, refined opaques
//! and case mappings.
//!
//! Heaps have value semantics. Every nondeterministic successor of a
//! machine state owns its own clone, including the location counter, so
//! location names are a deterministic function of the branch's history.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::syntax::{Expr, Label, Type};

/// Heap location, rendered `L0, L1, …`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocId(pub u32);

impl fmt::Display for LocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "div",
        }
    }

    /// Checked integer semantics shared by the engine and the formula
    /// evaluator. Division is Euclidean, matching SMT-LIB `div`.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Sub => a.checked_sub(b),
            ArithOp::Mul => a.checked_mul(b),
            ArithOp::Div => a.checked_div_euclid(b),
        }
    }
}

/// Arithmetic over integer constants and base-typed locations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(i64),
    Loc(LocId),
    Bin(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn bin(op: ArithOp, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn locations(&self, out: &mut BTreeSet<LocId>) {
        match self {
            Term::Const(_) => {}
            Term::Loc(l) => {
                out.insert(*l);
            }
            Term::Bin(_, a, b) => {
                a.locations(out);
                b.locations(out);
            }
        }
    }

    /// Evaluate under a (partial) valuation. `None` if a location is
    /// missing, a division by zero occurs, or arithmetic overflows.
    pub fn eval(&self, val: &impl Fn(LocId) -> Option<i64>) -> Option<i64> {
        match self {
            Term::Const(n) => Some(*n),
            Term::Loc(l) => val(*l),
            Term::Bin(op, a, b) => op.apply(a.eval(val)?, b.eval(val)?),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(n) => write!(f, "{n}"),
            Term::Loc(l) => write!(f, "{l}"),
            Term::Bin(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
        }
    }
}

/// Refinements on base-typed opaques. Exactly the forms `delta` produces.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    IsZero,
    Not(Box<Predicate>),
    /// `λx. (= x rhs)`
    Eq(Term),
}

impl Predicate {
    pub fn negate(self) -> Predicate {
        Predicate::Not(Box::new(self))
    }

    pub fn locations(&self, out: &mut BTreeSet<LocId>) {
        match self {
            Predicate::IsZero => {}
            Predicate::Not(p) => p.locations(out),
            Predicate::Eq(t) => t.locations(out),
        }
    }

    /// Direct evaluation of `p` at value `n`.
    pub fn holds(&self, n: i64, val: &impl Fn(LocId) -> Option<i64>) -> Option<bool> {
        match self {
            Predicate::IsZero => Some(n == 0),
            Predicate::Not(p) => p.holds(n, val).map(|b| !b),
            Predicate::Eq(t) => t.eval(val).map(|m| m == n),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::IsZero => f.write_str("zero?"),
            Predicate::Not(p) => write!(f, "¬{p}"),
            Predicate::Eq(t) => write!(f, "(≡ {t})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Storeable {
    Int(i64),
    Lam { param: String, ty: Type, body: Expr },
    Opaque { ty: Type, preds: Vec<Predicate> },
    /// Memo table of an opaque function with base-typed domain.
    Case { codomain: Type, entries: Vec<(LocId, LocId)> },
}

impl Storeable {
    pub fn opaque(ty: Type) -> Storeable {
        Storeable::Opaque { ty, preds: Vec::new() }
    }

    pub fn is_base(&self) -> bool {
        match self {
            Storeable::Int(_) => true,
            Storeable::Opaque { ty, .. } => ty.is_base(),
            _ => false,
        }
    }

    /// Every location this storeable refers to.
    pub fn locations(&self) -> BTreeSet<LocId> {
        let mut out = BTreeSet::new();
        match self {
            Storeable::Int(_) => {}
            Storeable::Lam { body, .. } => out = body.locations(),
            Storeable::Opaque { preds, .. } => preds.iter().for_each(|p| p.locations(&mut out)),
            Storeable::Case { entries, .. } => {
                for (i, o) in entries {
                    out.insert(*i);
                    out.insert(*o);
                }
            }
        }
        out
    }
}

impl fmt::Display for Storeable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Storeable::Int(n) => write!(f, "{n}"),
            Storeable::Lam { param, ty, body } => write!(f, "(λ ({param} : {ty}) {body})"),
            Storeable::Opaque { ty, preds } if preds.is_empty() => write!(f, "•{ty}"),
            Storeable::Opaque { ty, preds } => {
                write!(f, "•{{{ty}")?;
                for p in preds {
                    write!(f, ", {p}")?;
                }
                f.write_str("}")
            }
            Storeable::Case { entries, .. } => {
                f.write_str("case[")?;
                for (k, (i, o)) in entries.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{i} ↦ {o}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum HeapError {
    #[error("location {0} is not allocated")]
    Dangling(LocId),
    #[error("cannot refine {0}: it does not hold a base value")]
    RefineNonBase(LocId),
    #[error("{0} does not hold an opaque function of base domain")]
    NotCaseable(LocId),
    #[error("{input} is already an input of the case mapping at {func}")]
    DuplicateCaseInput { func: LocId, input: LocId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Heap {
    cells: BTreeMap<LocId, Storeable>,
    opaque_locs: BTreeMap<Label, LocId>,
    next: u32,
}

impl Heap {
    pub fn new() -> Heap {
        Heap::default()
    }

    pub fn get(&self, l: LocId) -> Option<&Storeable> {
        self.cells.get(&l)
    }

    pub fn contains(&self, l: LocId) -> bool {
        self.cells.contains_key(&l)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LocId, &Storeable)> {
        self.cells.iter().map(|(l, s)| (*l, s))
    }

    /// Location allocated for the source opaque `label`, if reached.
    pub fn opaque_loc(&self, label: Label) -> Option<LocId> {
        self.opaque_locs.get(&label).copied()
    }

    pub fn opaque_locs(&self) -> &BTreeMap<Label, LocId> {
        &self.opaque_locs
    }

    /// Concrete integer stored at `l`, if any.
    pub fn int_at(&self, l: LocId) -> Option<i64> {
        match self.cells.get(&l) {
            Some(Storeable::Int(n)) => Some(*n),
            _ => None,
        }
    }

    pub fn is_base(&self, l: LocId) -> bool {
        self.cells.get(&l).is_some_and(Storeable::is_base)
    }

    /// Base-typed locations: the variables of the heap's translation.
    pub fn base_locs(&self) -> BTreeSet<LocId> {
        self.iter().filter(|(_, s)| s.is_base()).map(|(l, _)| l).collect()
    }

    pub fn alloc(&mut self, s: Storeable) -> LocId {
        let l = LocId(self.next);
        self.next += 1;
        self.cells.insert(l, s);
        l
    }

    /// Allocate the source opaque `label`, reusing its location if it was
    /// already allocated on this branch.
    pub fn alloc_opaque(&mut self, label: Label, ty: Type) -> LocId {
        if let Some(l) = self.opaque_locs.get(&label) {
            return *l;
        }
        let l = self.alloc(Storeable::opaque(ty));
        self.opaque_locs.insert(label, l);
        l
    }

    /// Allocate a concrete value standing in for the source opaque `label`,
    /// so that an instantiated program can be related back to the
    /// location its opaque occupies in a symbolic run.
    pub fn alloc_instance(&mut self, label: Label, s: Storeable) -> LocId {
        let l = self.alloc(s);
        self.opaque_locs.insert(label, l);
        l
    }

    /// Strengthen the refinement at `l`. Concrete integers already subsume
    /// any consistent predicate and are left unchanged.
    pub fn refine(&mut self, l: LocId, p: Predicate) -> Result<(), HeapError> {
        match self.cells.get_mut(&l) {
            None => Err(HeapError::Dangling(l)),
            Some(Storeable::Int(_)) => Ok(()),
            Some(Storeable::Opaque { ty: Type::Int, preds }) => {
                if !preds.contains(&p) {
                    preds.push(p);
                }
                Ok(())
            }
            Some(_) => Err(HeapError::RefineNonBase(l)),
        }
    }

    /// Collapse the base opaque at `l` to the integer `n`, dropping its
    /// refinements.
    pub fn set_concrete(&mut self, l: LocId, n: i64) {
        debug_assert!(self.is_base(l), "set_concrete on non-base location {l}");
        self.cells.insert(l, Storeable::Int(n));
    }

    /// Record `input ↦ output` in the case mapping at `func`, turning an
    /// untouched base-domain opaque function into a case mapping first.
    pub fn extend_case(&mut self, func: LocId, input: LocId, output: LocId) -> Result<(), HeapError> {
        match self.cells.get_mut(&func) {
            None => Err(HeapError::Dangling(func)),
            Some(Storeable::Case { entries, .. }) => {
                if entries.iter().any(|(i, _)| *i == input) {
                    return Err(HeapError::DuplicateCaseInput { func, input });
                }
                entries.push((input, output));
                Ok(())
            }
            Some(s @ Storeable::Opaque { .. }) => {
                let codomain = match &*s {
                    Storeable::Opaque { ty: Type::Arrow(dom, cod), .. } if dom.is_base() => (**cod).clone(),
                    _ => return Err(HeapError::NotCaseable(func)),
                };
                *s = Storeable::Case { codomain, entries: vec![(input, output)] };
                Ok(())
            }
            Some(_) => Err(HeapError::NotCaseable(func)),
        }
    }

    /// Overwrite the storeable at an existing location (used when an
    /// opaque function is refined to one of the residue lambda shapes).
    pub fn update(&mut self, l: LocId, s: Storeable) -> Result<(), HeapError> {
        match self.cells.get_mut(&l) {
            None => Err(HeapError::Dangling(l)),
            Some(slot) => {
                *slot = s;
                Ok(())
            }
        }
    }

    /// Every location mentioned by a storeable, predicate, or case entry is
    /// allocated, and every reused opaque location exists.
    pub fn is_closed(&self) -> bool {
        self.cells.values().all(|s| s.locations().iter().all(|l| self.contains(*l)))
            && self.opaque_locs.values().all(|l| self.contains(*l))
    }
}

impl fmt::Display for Heap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, (l, s)) in self.cells.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l} ↦ {s}")?;
        }
        f.write_str("]")
    }
}
