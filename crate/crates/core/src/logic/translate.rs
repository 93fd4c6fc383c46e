use crate::heap::{Heap, LocId, Predicate, Storeable, Term};
use crate::syntax::Expr;

use super::Formula;

/// `⟦l : p⟧`
pub fn translate_pred(l: LocId, p: &Predicate) -> Formula {
    match p {
        Predicate::IsZero => Formula::eq(Term::Loc(l), Term::Const(0)),
        Predicate::Not(p) => Formula::not(translate_pred(l, p)),
        Predicate::Eq(rhs) => Formula::eq(Term::Loc(l), rhs.clone()),
    }
}

/// Conjunction of the first-order content of every heap binding.
pub fn translate_heap(h: &Heap) -> Formula {
    Formula::and(h.iter().map(|(l, s)| translate_binding(h, l, s)))
}

fn translate_binding(h: &Heap, l: LocId, s: &Storeable) -> Formula {
    match s {
        Storeable::Int(n) => Formula::eq(Term::Loc(l), Term::Const(*n)),
        Storeable::Opaque { ty, preds } if ty.is_base() => {
            Formula::and(preds.iter().map(|p| translate_pred(l, p)))
        }
        Storeable::Case { entries, .. } => {
            let mut parts = Vec::new();
            for (i, (in1, out1)) in entries.iter().enumerate() {
                for (in2, out2) in &entries[i + 1..] {
                    parts.push(Formula::implies(
                        Formula::eq(Term::Loc(*in1), Term::Loc(*in2)),
                        loc_equality(h, *out1, *out2),
                    ));
                }
            }
            Formula::and(parts)
        }
        Storeable::Lam { .. } | Storeable::Opaque { .. } => Formula::True,
    }
}

/// The function shapes produced by refining opaque functions.
enum Shape {
    /// `λx. La`
    Constant(LocId),
    /// `λx. (L2 (x L1))`
    Havoc { context: LocId, arg: LocId },
    /// `λx. λy. ((L1 x) y)`
    Delayed(LocId),
    Other,
}

fn shape(param: &str, body: &Expr) -> Shape {
    match body {
        Expr::Loc(a) => Shape::Constant(*a),
        Expr::App(f, inner) => match (&**f, &**inner) {
            (Expr::Loc(context), Expr::App(x, arg)) => match (&**x, &**arg) {
                (Expr::Var(v), Expr::Loc(arg)) if v == param => Shape::Havoc { context: *context, arg: *arg },
                _ => Shape::Other,
            },
            _ => Shape::Other,
        },
        Expr::Lam { param: y, body, .. } => match &**body {
            Expr::App(fx, yv) => match (&**fx, &**yv) {
                (Expr::App(f, x), Expr::Var(y2)) if y2 == y => match (&**f, &**x) {
                    (Expr::Loc(l1), Expr::Var(x2)) if x2 == param && y != param => Shape::Delayed(*l1),
                    _ => Shape::Other,
                },
                _ => Shape::Other,
            },
            _ => Shape::Other,
        },
        _ => Shape::Other,
    }
}

/// `⟦a = b⟧`: integer equality at base type, structural equality on the
/// refined function forms, and `false` for mismatched forms.
pub fn loc_equality(h: &Heap, a: LocId, b: LocId) -> Formula {
    if a == b {
        return Formula::True;
    }
    let (Some(sa), Some(sb)) = (h.get(a), h.get(b)) else {
        return Formula::False;
    };
    if sa.is_base() && sb.is_base() {
        return Formula::eq(Term::Loc(a), Term::Loc(b));
    }
    match (sa, sb) {
        // Two untouched opaque functions can always be instantiated alike.
        (Storeable::Opaque { .. }, Storeable::Opaque { .. }) => Formula::True,
        (Storeable::Case { entries: ea, .. }, Storeable::Case { entries: eb, .. }) => {
            let mut parts = Vec::new();
            for (in1, out1) in ea {
                for (in2, out2) in eb {
                    parts.push(Formula::implies(
                        Formula::eq(Term::Loc(*in1), Term::Loc(*in2)),
                        loc_equality(h, *out1, *out2),
                    ));
                }
            }
            Formula::and(parts)
        }
        (Storeable::Lam { param: pa, body: ba, .. }, Storeable::Lam { param: pb, body: bb, .. }) => {
            match (shape(pa, ba), shape(pb, bb)) {
                (Shape::Constant(x), Shape::Constant(y)) => loc_equality(h, x, y),
                (Shape::Havoc { context: c1, arg: a1 }, Shape::Havoc { context: c2, arg: a2 }) => {
                    Formula::and([loc_equality(h, c1, c2), loc_equality(h, a1, a2)])
                }
                (Shape::Delayed(x), Shape::Delayed(y)) => loc_equality(h, x, y),
                _ => Formula::False,
            }
        }
        _ => Formula::False,
    }
}
