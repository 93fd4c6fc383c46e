//! The full pipeline: search for errors, build a counterexample for each
//! blamed branch in turn, and stop at the first one that validates.

use std::time::{Duration, Instant};

use crate::cex::{build_counterexample, validate, CexError, Counterexample, Validation};
use crate::logic::{Prover, Solver};
use crate::machine::{ExhaustReason, Flow, Outcome, Search, SearchError, SearchReport, TraceEvent};
use crate::syntax::Program;

#[derive(Clone, Debug)]
pub struct Config {
    pub max_steps: u64,
    pub max_states: usize,
    pub timeout: Option<Duration>,
    pub validate: bool,
    /// Evaluation steps allowed when re-running an instantiated program.
    pub validation_fuel: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_steps: 100_000,
            max_states: 50_000,
            timeout: Some(Duration::from_secs(10)),
            validate: true,
            validation_fuel: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conclusion {
    Counterexample(Counterexample),
    /// No error found. `complete` is false when some budget ran out.
    Safe { complete: bool },
    /// Errors were reached but no counterexample could be confirmed.
    Unknown(String),
}

#[derive(Clone, Debug)]
pub struct Report {
    pub conclusion: Conclusion,
    pub search: SearchReport,
}

/// Explore `p` and try each blame outcome in breadth-first order.
pub fn verify<S: Solver>(
    p: &Program,
    prover: &mut Prover<S>,
    cfg: &Config,
    trace: Option<&mut dyn FnMut(&TraceEvent<'_>)>,
) -> Result<Report, SearchError> {
    let mut search = Search::new().max_steps(cfg.max_steps).max_states(cfg.max_states);
    if let Some(t) = cfg.timeout {
        search = search.deadline(Instant::now() + t);
    }
    if let Some(t) = trace {
        search = search.trace(t);
    }

    let mut found: Option<Counterexample> = None;
    let mut problems: Vec<String> = Vec::new();
    let mut solver_error = None;
    let report = search.run_with(p, prover, |o, prover| {
        let Outcome::Blame { label, op, heap } = o else { return Flow::Continue };
        match build_counterexample(p, prover, *label, *op, heap) {
            Ok(mut c) => {
                if cfg.validate {
                    c.validation = validate(p, &c, cfg.validation_fuel);
                    if let Validation::Failed(why) = &c.validation {
                        problems.push(format!("candidate for {op} at {label} did not validate: {why}"));
                        return Flow::Continue;
                    }
                }
                found = Some(c);
                Flow::Stop
            }
            Err(CexError::Solver(e)) => {
                solver_error = Some(e);
                Flow::Stop
            }
            Err(e) => {
                problems.push(format!("{op} at {label}: {e}"));
                Flow::Continue
            }
        }
    })?;
    if let Some(e) = solver_error {
        return Err(e.into());
    }

    let conclusion = match found {
        Some(c) => Conclusion::Counterexample(c),
        None if !problems.is_empty() => Conclusion::Unknown(problems.join("; ")),
        None => {
            let complete = !report
                .outcomes
                .iter()
                .any(|o| matches!(o, Outcome::Exhausted(r) if *r != ExhaustReason::SolverUnknown));
            Conclusion::Safe { complete }
        }
    };
    Ok(Report { conclusion, search: report })
}
