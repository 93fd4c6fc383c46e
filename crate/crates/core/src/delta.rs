//! Primitive operations over concrete and symbolic base values.
//!
//! `delta` is a relation: on symbolic arguments it returns one result per
//! feasible outcome, each paired with the heap refined by the assumption
//! that selects it. Symbolic results are returned as fresh base opaques
//! carrying their defining equation; the caller allocates them.

use thiserror::Error;

use crate::heap::{ArithOp, Heap, HeapError, LocId, Predicate, Storeable, Term};
use crate::logic::{Prover, Solver, SolverError, Verdict};
use crate::syntax::{Op, Type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeltaResult {
    Val(Storeable, Heap),
    Error(Op, Heap),
}

impl DeltaResult {
    pub fn heap(&self) -> &Heap {
        match self {
            DeltaResult::Val(_, h) | DeltaResult::Error(_, h) => h,
        }
    }
}

#[derive(Debug, Error)]
pub enum DeltaError {
    #[error("`{op}` applied to {found} argument(s)")]
    Arity { op: Op, found: usize },
    #[error("argument {0} is not a base value")]
    NotBase(LocId),
    #[error("integer overflow in `{0}`")]
    Overflow(Op),
    #[error(transparent)]
    Heap(#[from] HeapError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn truth(b: bool) -> Storeable {
    Storeable::Int(i64::from(b))
}

fn symbolic(t: Term) -> Storeable {
    Storeable::Opaque { ty: Type::Int, preds: vec![Predicate::Eq(t)] }
}

/// The term standing for the value at `l`: its constant if concrete.
fn operand(h: &Heap, l: LocId) -> Term {
    h.int_at(l).map_or(Term::Loc(l), Term::Const)
}

/// Heap under the assumption that `l` holds 0. An unrefined opaque
/// collapses to the literal; a refined one keeps its refinements and gains
/// `(≡ 0)` so that they still reach the solver.
fn assume_zero(h: &Heap, l: LocId) -> Result<Heap, HeapError> {
    let mut h = h.clone();
    match h.get(l) {
        Some(Storeable::Opaque { preds, .. }) if preds.is_empty() => h.set_concrete(l, 0),
        _ => h.refine(l, Predicate::Eq(Term::Const(0)))?,
    }
    Ok(h)
}

fn refined(h: &Heap, l: LocId, p: Predicate) -> Result<Heap, HeapError> {
    let mut h = h.clone();
    h.refine(l, p)?;
    Ok(h)
}

fn arith(op: Op) -> Option<(ArithOp, Option<i64>)> {
    Some(match op {
        Op::Add1 => (ArithOp::Add, Some(1)),
        Op::Sub1 => (ArithOp::Sub, Some(1)),
        Op::Add => (ArithOp::Add, None),
        Op::Sub => (ArithOp::Sub, None),
        Op::Mul => (ArithOp::Mul, None),
        _ => return None,
    })
}

/// `δ(Σ, op, args)`.
pub fn delta<S: Solver>(
    prover: &mut Prover<S>,
    h: &Heap,
    op: Op,
    args: &[LocId],
) -> Result<Vec<DeltaResult>, DeltaError> {
    if args.len() != op.arity() {
        return Err(DeltaError::Arity { op, found: args.len() });
    }
    if let Some(bad) = args.iter().find(|l| !h.is_base(**l)) {
        return Err(DeltaError::NotBase(*bad));
    }
    let val = |s: Storeable| DeltaResult::Val(s, h.clone());

    if let Some((aop, k)) = arith(op) {
        let lhs = operand(h, args[0]);
        let rhs = k.map_or_else(|| operand(h, args[1]), Term::Const);
        return Ok(vec![match (&lhs, &rhs) {
            (Term::Const(x), Term::Const(y)) => {
                val(Storeable::Int(aop.apply(*x, *y).ok_or(DeltaError::Overflow(op))?))
            }
            _ => val(symbolic(Term::bin(aop, lhs, rhs))),
        }]);
    }

    match op {
        Op::IsZero => {
            let l = args[0];
            Ok(match prover.prove(h, l, &Predicate::IsZero)? {
                Verdict::Proved => vec![val(truth(true))],
                Verdict::Refuted => vec![val(truth(false))],
                Verdict::Ambig => vec![
                    DeltaResult::Val(truth(true), assume_zero(h, l)?),
                    DeltaResult::Val(truth(false), refined(h, l, Predicate::IsZero.negate())?),
                ],
            })
        }
        Op::Div => {
            let (a, b) = (args[0], args[1]);
            let quotient = Term::bin(ArithOp::Div, operand(h, a), operand(h, b));
            if let Some(n) = h.int_at(b) {
                if n == 0 {
                    return Ok(vec![DeltaResult::Error(Op::Div, h.clone())]);
                }
                return Ok(vec![match h.int_at(a) {
                    Some(m) => val(Storeable::Int(ArithOp::Div.apply(m, n).ok_or(DeltaError::Overflow(op))?)),
                    None => val(symbolic(quotient)),
                }]);
            }
            Ok(match prover.prove(h, b, &Predicate::IsZero)? {
                Verdict::Proved => vec![DeltaResult::Error(Op::Div, h.clone())],
                Verdict::Refuted => vec![val(symbolic(quotient))],
                Verdict::Ambig => vec![
                    DeltaResult::Val(symbolic(quotient), refined(h, b, Predicate::IsZero.negate())?),
                    DeltaResult::Error(Op::Div, assume_zero(h, b)?),
                ],
            })
        }
        Op::NumEq => {
            let (a, b) = (args[0], args[1]);
            if a == b {
                return Ok(vec![val(truth(true))]);
            }
            if let (Some(x), Some(y)) = (h.int_at(a), h.int_at(b)) {
                return Ok(vec![val(truth(x == y))]);
            }
            // Refine whichever side is still symbolic.
            let (target, other) = if h.int_at(a).is_none() { (a, b) } else { (b, a) };
            let eq = Predicate::Eq(operand(h, other));
            Ok(match prover.prove(h, target, &eq)? {
                Verdict::Proved => vec![val(truth(true))],
                Verdict::Refuted => vec![val(truth(false))],
                Verdict::Ambig => vec![
                    DeltaResult::Val(truth(true), refined(h, target, eq.clone())?),
                    DeltaResult::Val(truth(false), refined(h, target, eq.negate())?),
                ],
            })
        }
        _ => unreachable!("arithmetic handled above"),
    }
}
