//! First-order view of heaps: translation to formulas, the three-valued
//! proof relation, and the solver backends that answer satisfiability
//! queries.

mod bounded;
mod prove;
pub mod smtlib;
mod translate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::heap::{LocId, Term};

pub use bounded::BoundedSolver;
pub use prove::{ProofStats, Prover, Verdict};
pub use smtlib::SmtProcess;
pub use translate::{loc_equality, translate_heap, translate_pred};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            f => Formula::Not(Box::new(f)),
        }
    }

    /// Conjunction, flattened, with `true` conjuncts dropped.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().expect("one conjunct"),
            _ => Formula::And(out),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        match (&a, &b) {
            (Formula::False, _) | (_, Formula::True) => Formula::True,
            (Formula::True, _) => b,
            _ => Formula::Implies(Box::new(a), Box::new(b)),
        }
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::True => Vec::new(),
            Formula::And(parts) => parts.iter().flat_map(|p| p.conjuncts()).collect(),
            f => vec![f],
        }
    }

    pub fn vars(&self) -> BTreeSet<LocId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<LocId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Eq(a, b) => {
                a.locations(out);
                b.locations(out);
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
            Formula::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Evaluate under a total valuation of the formula's variables, using
    /// the engine's checked integer arithmetic. `None` when a term is
    /// undefined (division by zero, overflow, missing variable).
    pub fn eval(&self, m: &Model) -> Option<bool> {
        let val = |l: LocId| m.get(l);
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Eq(a, b) => a.eval(&val)? == b.eval(&val)?,
            Formula::Not(f) => !f.eval(m)?,
            Formula::And(fs) => {
                let mut all = true;
                for f in fs {
                    all &= f.eval(m)?;
                }
                all
            }
            Formula::Or(fs) => {
                let mut any = false;
                for f in fs {
                    any |= f.eval(m)?;
                }
                any
            }
            Formula::Implies(a, b) => !a.eval(m)? || b.eval(m)?,
        })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&smtlib::formula_to_smt(self))
    }
}

/// Satisfying assignment of integers to base-typed locations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model(BTreeMap<LocId, i64>);

impl Model {
    pub fn new() -> Model {
        Model::default()
    }

    pub fn get(&self, l: LocId) -> Option<i64> {
        self.0.get(&l).copied()
    }

    /// Value of `l`, with unconstrained locations defaulting to 0.
    pub fn value(&self, l: LocId) -> i64 {
        self.get(l).unwrap_or(0)
    }

    pub fn insert(&mut self, l: LocId, v: i64) {
        self.0.insert(l, v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (LocId, i64)> + '_ {
        self.0.iter().map(|(l, v)| (*l, *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(LocId, i64)> for Model {
    fn from_iter<I: IntoIterator<Item = (LocId, i64)>>(iter: I) -> Self {
        Model(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(Model),
    Unsat,
    Unknown,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("failed to start solver `{cmd}`: {source}")]
    Spawn { cmd: String, source: std::io::Error },
    #[error("solver i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected solver response: {0}")]
    Protocol(String),
}

/// A satisfiability oracle over integer formulas. Each call is a
/// self-contained query.
pub trait Solver {
    fn name(&self) -> String;

    /// Decide `f`. A `Sat` model assigns every location of `vars` and of
    /// `f` itself.
    fn check(&mut self, vars: &BTreeSet<LocId>, f: &Formula) -> Result<SatResult, SolverError>;
}

impl<S: Solver + ?Sized> Solver for Box<S> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn check(&mut self, vars: &BTreeSet<LocId>, f: &Formula) -> Result<SatResult, SolverError> {
        (**self).check(vars, f)
    }
}

/// Solve `f` over its own variables.
pub fn solve(solver: &mut dyn Solver, f: &Formula) -> Result<SatResult, SolverError> {
    solver.check(&f.vars(), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heap::ArithOp;

    fn v(n: u32) -> Term {
        Term::Loc(LocId(n))
    }

    #[test]
    fn and_flattens_and_short_circuits() {
        let a = Formula::eq(v(0), Term::Const(1));
        let b = Formula::eq(v(1), Term::Const(2));
        let f = Formula::and([Formula::True, Formula::and([a.clone(), b.clone()])]);
        assert_eq!(f, Formula::And(vec![a.clone(), b]));
        assert_eq!(Formula::and([a, Formula::False]), Formula::False);
        assert_eq!(Formula::and([]), Formula::True);
    }

    #[test]
    fn eval_undefined_on_division_by_zero() {
        let m: Model = [(LocId(0), 0)].into_iter().collect();
        let f = Formula::eq(Term::bin(ArithOp::Div, Term::Const(1), v(0)), Term::Const(0));
        assert_eq!(f.eval(&m), None);
        let g = Formula::implies(Formula::eq(v(0), Term::Const(0)), Formula::False);
        assert_eq!(g.eval(&m), Some(false));
    }
}
