//! Runs against a real SMT solver when one is installed; each test is a
//! no-op otherwise.

mod common;

use std::collections::BTreeSet;
use std::path::Path;

use spcf::cex::Validation;
use spcf::heap::{ArithOp, LocId, Term};
use spcf::logic::{BoundedSolver, Formula, Prover, SatResult, SmtProcess, Solver};
use spcf::syntax::parse;
use spcf::verify::{verify, Conclusion, Config};

use common::corpus;

fn z3() -> Option<SmtProcess> {
    let path = ["/usr/local/bin/z3", "/usr/bin/z3"].into_iter().find(|p| Path::new(p).exists());
    if path.is_none() {
        eprintln!("z3 not installed; skipping");
    }
    path.map(SmtProcess::detect)
}

fn v(n: u32) -> Term {
    Term::Loc(LocId(n))
}

#[test]
fn worked_example_constraints() {
    let Some(mut z3) = z3() else { return };
    let f = Formula::and([
        Formula::eq(v(5), Term::bin(ArithOp::Sub, Term::Const(100), v(4))),
        Formula::eq(Term::Const(0), v(5)),
    ]);
    let vars: BTreeSet<LocId> = [3, 4, 5].into_iter().map(LocId).collect();
    let SatResult::Sat(m) = z3.check(&vars, &f).unwrap() else { panic!() };
    assert_eq!((m.get(LocId(4)), m.get(LocId(5))), (Some(100), Some(0)));
    assert!(m.get(LocId(3)).is_some());
}

#[test]
fn unsat_and_negative_models() {
    let Some(mut z3) = z3() else { return };
    let contradiction = Formula::and([Formula::eq(v(0), Term::Const(1)), Formula::eq(v(0), Term::Const(2))]);
    assert_eq!(z3.check(&BTreeSet::new(), &contradiction).unwrap(), SatResult::Unsat);

    let negative = Formula::eq(Term::bin(ArithOp::Add, v(0), Term::Const(7)), Term::Const(-5));
    let SatResult::Sat(m) = z3.check(&BTreeSet::new(), &negative).unwrap() else { panic!() };
    assert_eq!(m.get(LocId(0)), Some(-12));
}

#[test]
fn nonlinear_unsat_beyond_the_builtin_bound() {
    let Some(mut z3) = z3() else { return };
    // x * x = 2 has no integer solution; the bounded search cannot tell.
    let f = Formula::eq(Term::bin(ArithOp::Mul, v(0), v(0)), Term::Const(2));
    assert_eq!(BoundedSolver::new(16).check(&BTreeSet::new(), &f).unwrap(), SatResult::Unknown);
    assert_eq!(z3.check(&BTreeSet::new(), &f).unwrap(), SatResult::Unsat);
}

#[test]
fn same_verdicts_as_the_builtin_solver() {
    let Some(z3) = z3() else { return };
    let programs = corpus(include_str!("data/handwritten.spcf"));
    let mut external = Prover::new(z3);
    for p in &programs {
        let cfg = Config::default();
        let a = verify(p, &mut Prover::new(BoundedSolver::default()), &cfg, None).unwrap();
        let b = verify(p, &mut external, &cfg, None).unwrap();
        match (&a.conclusion, &b.conclusion) {
            (Conclusion::Counterexample(x), Conclusion::Counterexample(y)) => {
                assert_eq!((x.blame, x.op), (y.blame, y.op), "{p}");
                assert_eq!(y.validation, Validation::Validated, "{p}");
            }
            // The bounded search may give up where a complete solver decides.
            (Conclusion::Unknown(_), _) => {}
            (x, y) => assert_eq!(std::mem::discriminant(x), std::mem::discriminant(y), "{p}"),
        }
    }
}

#[test]
fn solver_answer_beyond_the_builtin_bound() {
    let Some(z3) = z3() else { return };
    let p = parse("((λ (x : int) (div 1 (- x 100000))) (• int))").unwrap();
    let r = verify(&p, &mut Prover::new(z3), &Config::default(), None).unwrap();
    let Conclusion::Counterexample(c) = r.conclusion else { panic!("{:?}", r.conclusion) };
    assert_eq!(c.bindings.values().next().unwrap().to_string(), "100000");
    assert_eq!(c.validation, Validation::Validated);
}
