//! Running a closed, opaque-free program through both the symbolic machine
//! and the concrete interpreter, and comparing what each observes.

use std::fmt;

use crate::logic::{Prover, Solver};
use crate::machine::{ExhaustReason, Outcome, Search, SearchError};
use crate::syntax::{Label, Op, Program};

use super::{concrete_eval, ConcreteResult, ConcreteValue, EvalError};

/// What an evaluator reports about a closed program, with functions
/// compared only by being functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Observation {
    Int(i64),
    Function,
    Blame { label: Label, op: Op },
    /// Some integer left the 64-bit range.
    Overflow,
    /// No single outcome within the budget (or an evaluation failure).
    Inconclusive(String),
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Int(n) => write!(f, "{n}"),
            Observation::Function => f.write_str("function"),
            Observation::Blame { label, op } => write!(f, "error: {op} at {label}"),
            Observation::Overflow => f.write_str("overflow"),
            Observation::Inconclusive(why) => write!(f, "inconclusive: {why}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Differential {
    pub machine: Observation,
    pub concrete: Observation,
}

impl Differential {
    pub fn agree(&self) -> bool {
        self.machine == self.concrete
    }
}

pub fn observe_concrete(p: &Program, fuel: u64) -> Observation {
    match concrete_eval(&p.root, fuel) {
        Ok(ConcreteResult::Value(ConcreteValue::Int(n))) => Observation::Int(n),
        Ok(ConcreteResult::Value(ConcreteValue::Closure { .. })) => Observation::Function,
        Ok(ConcreteResult::Err { label, op }) => Observation::Blame { label, op },
        Ok(ConcreteResult::Diverged) => Observation::Inconclusive(format!("out of fuel after {fuel} steps")),
        Err(EvalError::Overflow(_)) => Observation::Overflow,
        Err(e) => Observation::Inconclusive(e.to_string()),
    }
}

/// The machine's single outcome. An opaque-free program never branches, so
/// more than one outcome is itself a disagreement worth reporting.
pub fn observe_machine<S: Solver>(
    p: &Program,
    prover: &mut Prover<S>,
    max_steps: u64,
) -> Result<Observation, SearchError> {
    let report = Search::new().max_steps(max_steps).run(p, prover)?;
    let [outcome] = &report.outcomes[..] else {
        return Ok(Observation::Inconclusive(format!("{} outcomes", report.outcomes.len())));
    };
    Ok(match outcome {
        Outcome::Answer { loc, heap, .. } => match heap.int_at(*loc) {
            Some(n) => Observation::Int(n),
            None if heap.is_base(*loc) => Observation::Inconclusive(format!("symbolic answer {loc}")),
            None => Observation::Function,
        },
        Outcome::Blame { label, op, .. } => Observation::Blame { label: *label, op: *op },
        Outcome::Exhausted(ExhaustReason::Overflow) => Observation::Overflow,
        Outcome::Exhausted(r) => Observation::Inconclusive(r.to_string()),
    })
}

/// Evaluate `p` both ways. The budgets count machine steps and
/// interpreter steps respectively.
pub fn differential<S: Solver>(
    p: &Program,
    prover: &mut Prover<S>,
    max_steps: u64,
    fuel: u64,
) -> Result<Differential, SearchError> {
    Ok(Differential { machine: observe_machine(p, prover, max_steps)?, concrete: observe_concrete(p, fuel) })
}
