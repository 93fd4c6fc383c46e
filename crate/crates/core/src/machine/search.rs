use std::collections::VecDeque;
use std::fmt;
use std::time::Instant;

use thiserror::Error;

use crate::delta::DeltaError;
use crate::heap::{Heap, LocId};
use crate::logic::{ProofStats, Prover, Solver, SolverError};
use crate::syntax::{typecheck, Label, Op, Program, Type, TypeError};

use super::{step, Rule, State, StepError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExhaustReason {
    StepBudget,
    StateBudget,
    /// The solver answered `unknown` on some query along the way.
    SolverUnknown,
    Timeout,
    /// A concrete operation left the 64-bit integer range.
    Overflow,
}

impl fmt::Display for ExhaustReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExhaustReason::StepBudget => "step-budget",
            ExhaustReason::StateBudget => "state-budget",
            ExhaustReason::SolverUnknown => "solver-unknown",
            ExhaustReason::Timeout => "timeout",
            ExhaustReason::Overflow => "overflow",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Answer { loc: LocId, heap: Heap, ty: Type },
    Blame { label: Label, op: Op, heap: Heap },
    Exhausted(ExhaustReason),
}

impl Outcome {
    pub fn is_blame(&self) -> bool {
        matches!(self, Outcome::Blame { .. })
    }
}

#[derive(Clone, Debug, Default)]
pub struct SearchReport {
    pub outcomes: Vec<Outcome>,
    pub states_explored: u64,
    pub solver_queries: u64,
    pub proof_stats: ProofStats,
}

impl SearchReport {
    pub fn blames(&self) -> impl Iterator<Item = &Outcome> {
        self.outcomes.iter().filter(|o| o.is_blame())
    }

    pub fn answers(&self) -> impl Iterator<Item = &Outcome> {
        self.outcomes.iter().filter(|o| matches!(o, Outcome::Answer { .. }))
    }

    /// Whether some part of the execution tree went unexplored.
    pub fn exhausted(&self) -> bool {
        self.outcomes.iter().any(|o| matches!(o, Outcome::Exhausted(_)))
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Step(StepError),
}

impl From<StepError> for SearchError {
    fn from(e: StepError) -> SearchError {
        match e.solver_error() {
            Ok(s) => SearchError::Solver(s),
            Err(e) => SearchError::Step(e),
        }
    }
}

/// One transition, for tracing.
pub struct TraceEvent<'a> {
    pub state: &'a State,
    pub rule: Rule,
}

impl fmt::Display for TraceEvent<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}⟩ | {} | {}", self.state.expr, self.state.heap, self.rule)
    }
}

/// Returned by outcome callbacks to continue or end the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

type Tracer<'t> = Box<dyn FnMut(&TraceEvent<'_>) + 't>;

/// Breadth-first exploration of the execution tree of a program.
pub struct Search<'t> {
    pub max_steps: u64,
    pub max_states: usize,
    pub deadline: Option<Instant>,
    trace: Option<Tracer<'t>>,
}

impl Default for Search<'_> {
    fn default() -> Self {
        Search { max_steps: 100_000, max_states: 50_000, deadline: None, trace: None }
    }
}

impl<'t> Search<'t> {
    pub fn new() -> Self {
        Search::default()
    }

    /// Bound on the total number of transitions taken across all branches.
    pub fn max_steps(mut self, n: u64) -> Self {
        self.max_steps = n;
        self
    }

    /// Bound on the number of states waiting in the frontier.
    pub fn max_states(mut self, n: usize) -> Self {
        self.max_states = n;
        self
    }

    pub fn deadline(mut self, at: Instant) -> Self {
        self.deadline = Some(at);
        self
    }

    pub fn trace(mut self, f: impl FnMut(&TraceEvent<'_>) + 't) -> Self {
        self.trace = Some(Box::new(f));
        self
    }

    /// Explore until every branch terminates or a budget runs out.
    pub fn run<S: Solver>(&mut self, p: &Program, prover: &mut Prover<S>) -> Result<SearchReport, SearchError> {
        self.run_with(p, prover, |_, _| Flow::Continue)
    }

    /// Like [`Search::run`], handing each terminal outcome to `on_outcome`
    /// as soon as it is reached, together with the prover.
    pub fn run_with<S: Solver>(
        &mut self,
        p: &Program,
        prover: &mut Prover<S>,
        mut on_outcome: impl FnMut(&Outcome, &mut Prover<S>) -> Flow,
    ) -> Result<SearchReport, SearchError> {
        let ty = typecheck(p)?;
        let base_queries = prover.stats().solver_queries;
        let base_unknown = prover.stats().unknown_answers;
        let mut report = SearchReport::default();
        let mut frontier = VecDeque::from([State::initial(&p.root)]);
        let mut steps = 0u64;

        let mut emit = |report: &mut SearchReport, prover: &mut Prover<S>, o: Outcome| {
            let flow = on_outcome(&o, prover);
            report.outcomes.push(o);
            flow
        };

        'search: while let Some(s) = frontier.pop_front() {
            report.states_explored += 1;
            match &s.expr {
                crate::syntax::Expr::Loc(l) => {
                    let o = Outcome::Answer { loc: *l, heap: s.heap, ty: ty.clone() };
                    if emit(&mut report, prover, o) == Flow::Stop {
                        break;
                    }
                    continue;
                }
                crate::syntax::Expr::Err { label, op } => {
                    if p.known_labels.contains(label) {
                        let o = Outcome::Blame { label: *label, op: *op, heap: s.heap };
                        if emit(&mut report, prover, o) == Flow::Stop {
                            break;
                        }
                    }
                    continue;
                }
                _ => {}
            }
            if steps >= self.max_steps {
                emit(&mut report, prover, Outcome::Exhausted(ExhaustReason::StepBudget));
                break;
            }
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                emit(&mut report, prover, Outcome::Exhausted(ExhaustReason::Timeout));
                break;
            }
            steps += 1;
            let succs = match step(prover, &s) {
                Ok(succs) => succs,
                Err(StepError::Delta(DeltaError::Overflow(_))) => {
                    if emit(&mut report, prover, Outcome::Exhausted(ExhaustReason::Overflow)) == Flow::Stop {
                        break;
                    }
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            if succs.is_empty() {
                return Err(SearchError::Step(StepError::Stuck(s.expr)));
            }
            for (next, rule) in succs {
                if let Some(t) = self.trace.as_mut() {
                    t(&TraceEvent { state: &next, rule });
                }
                if frontier.len() >= self.max_states {
                    emit(&mut report, prover, Outcome::Exhausted(ExhaustReason::StateBudget));
                    break 'search;
                }
                frontier.push_back(next);
            }
        }

        if prover.stats().unknown_answers > base_unknown {
            report.outcomes.push(Outcome::Exhausted(ExhaustReason::SolverUnknown));
        }
        report.solver_queries = prover.stats().solver_queries - base_queries;
        report.proof_stats = prover.stats().clone();
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::BoundedSolver;
    use crate::syntax::parse;

    fn run(src: &str) -> SearchReport {
        let p = parse(src).unwrap();
        Search::new().run(&p, &mut Prover::new(BoundedSolver::default())).unwrap()
    }

    #[test]
    fn concrete_program_has_one_answer() {
        let r = run("(div 7 2)");
        assert_eq!(r.outcomes.len(), 1);
        let Outcome::Answer { loc, heap, ty } = &r.outcomes[0] else { panic!("{r:?}") };
        assert_eq!((heap.int_at(*loc), ty), (Some(3), &Type::Int));
    }

    #[test]
    fn division_by_literal_zero() {
        let r = run("(add1 (div 1 0))");
        assert_eq!(r.outcomes.len(), 1);
        assert!(matches!(r.outcomes[0], Outcome::Blame { label: Label(2), op: Op::Div, .. }));
    }

    #[test]
    fn escaped_divider_is_blamed_at_its_site() {
        let r = run("((• ((int -> int) -> int)) (λ (x : int) (div 1 x)))");
        let blames: Vec<_> = r.blames().collect();
        assert!(!blames.is_empty());
        for b in blames {
            assert!(matches!(b, Outcome::Blame { label: Label(2), op: Op::Div, .. }));
        }
    }

    #[test]
    fn budgets_are_reported() {
        let p = parse("((• ((int -> int) -> int)) (λ (x : int) (div 1 x)))").unwrap();
        let r = Search::new().max_steps(2).run(&p, &mut Prover::new(BoundedSolver::default())).unwrap();
        assert_eq!(r.outcomes, vec![Outcome::Exhausted(ExhaustReason::StepBudget)]);
    }

    #[test]
    fn stop_early() {
        let p = parse("(if (• int) (div 1 0) (div 2 0))").unwrap();
        let r = Search::new()
            .run_with(&p, &mut Prover::new(BoundedSolver::default()), |o, _| {
                if o.is_blame() { Flow::Stop } else { Flow::Continue }
            })
            .unwrap();
        assert_eq!(r.blames().count(), 1);
    }

    #[test]
    fn trace_lines() {
        let p = parse("(add1 1)").unwrap();
        let mut lines = Vec::new();
        Search::new()
            .trace(|e| lines.push(e.to_string()))
            .run(&p, &mut Prover::new(BoundedSolver::default()))
            .unwrap();
        assert_eq!(lines, vec!["⟨(add1 L0)⟩ | [L0 ↦ 1] | Conc", "⟨L1⟩ | [L0 ↦ 1, L1 ↦ 2] | Prim"]);
    }
}
