use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::heap::{Heap, LocId, Predicate};

use super::{translate_heap, translate_pred, Formula, SatResult, Solver, SolverError};

/// Answer of the proof relation `Σ ⊢ l : p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Proved,
    Refuted,
    Ambig,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Proved => "✓",
            Verdict::Refuted => "✗",
            Verdict::Ambig => "?",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProofStats {
    /// Queries sent to the backend (cache hits excluded).
    pub solver_queries: u64,
    pub unknown_answers: u64,
    /// Audited queries whose heap was found both to imply and to refute
    /// the predicate.
    pub contradictions: u64,
    /// Audited concrete queries where the solver disagreed with direct
    /// evaluation.
    pub concrete_mismatches: u64,
}

/// The proof relation, backed by a satisfiability oracle.
pub struct Prover<S> {
    solver: S,
    stats: ProofStats,
    audit: bool,
    cache: BTreeMap<(BTreeSet<LocId>, String), SatResult>,
}

impl<S: Solver> Prover<S> {
    pub fn new(solver: S) -> Prover<S> {
        Prover { solver, stats: ProofStats::default(), audit: false, cache: BTreeMap::new() }
    }

    /// In audit mode both validity and refutation are always queried, and
    /// concrete queries are also sent to the solver, so that inconsistent
    /// answers are counted in [`ProofStats`].
    pub fn audited(mut self) -> Prover<S> {
        self.audit = true;
        self
    }

    pub fn stats(&self) -> &ProofStats {
        &self.stats
    }

    pub fn solver(&self) -> &S {
        &self.solver
    }

    pub fn solver_mut(&mut self) -> &mut S {
        &mut self.solver
    }

    pub fn into_solver(self) -> S {
        self.solver
    }

    /// Decide `f` over `vars ∪ vars(f)`, memoizing identical queries.
    pub fn check(&mut self, vars: &BTreeSet<LocId>, f: &Formula) -> Result<SatResult, SolverError> {
        let key = (vars.clone(), super::smtlib::formula_to_smt(f));
        if let Some(r) = self.cache.get(&key) {
            return Ok(r.clone());
        }
        self.stats.solver_queries += 1;
        let r = self.solver.check(vars, f)?;
        if r == SatResult::Unknown {
            self.stats.unknown_answers += 1;
        }
        self.cache.insert(key, r.clone());
        Ok(r)
    }

    fn concrete(h: &Heap, l: LocId, p: &Predicate) -> Option<bool> {
        p.holds(h.int_at(l)?, &|m| h.int_at(m))
    }

    /// `Σ ⊢ l : p`: valid `φ ⇒ ψ` proves, unsatisfiable `φ ∧ ψ` refutes,
    /// anything else (including solver `unknown`) is ambiguous.
    pub fn prove(&mut self, h: &Heap, l: LocId, p: &Predicate) -> Result<Verdict, SolverError> {
        let direct = Self::concrete(h, l, p);
        if let (Some(b), false) = (direct, self.audit) {
            return Ok(if b { Verdict::Proved } else { Verdict::Refuted });
        }
        let phi = translate_heap(h);
        let psi = translate_pred(l, p);
        let vars = h.base_locs();
        let refuted = self.check(&vars, &Formula::and([phi.clone(), psi.clone()]))? == SatResult::Unsat;
        let verdict = if refuted && !self.audit {
            Verdict::Refuted
        } else {
            let valid = self.check(&vars, &Formula::and([phi, Formula::not(psi)]))? == SatResult::Unsat;
            if valid && refuted {
                self.stats.contradictions += 1;
            }
            match (valid, refuted) {
                (_, true) => Verdict::Refuted,
                (true, false) => Verdict::Proved,
                (false, false) => Verdict::Ambig,
            }
        };
        if let Some(b) = direct {
            let expect = if b { Verdict::Proved } else { Verdict::Refuted };
            if verdict != expect {
                self.stats.concrete_mismatches += 1;
            }
            return Ok(expect);
        }
        Ok(verdict)
    }
}
