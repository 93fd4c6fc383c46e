//! Small-step reduction over `⟨E, Σ⟩` states.
//!
//! [`step`] returns every successor of a state; nondeterminism comes from
//! δ on symbolic values and from the several ways an opaque function may
//! treat a higher-order argument. [`Search`] explores the resulting tree
//! breadth first.

mod search;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::delta::{delta, DeltaError, DeltaResult};
use crate::heap::{Heap, HeapError, LocId, Storeable};
use crate::logic::{Prover, Solver, SolverError};
use crate::syntax::{Expr, Label, Op, Type};

pub use search::{ExhaustReason, Flow, Outcome, Search, SearchError, SearchReport, TraceEvent};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub expr: Expr,
    pub heap: Heap,
    pub steps: u64,
}

impl State {
    pub fn new(expr: Expr, heap: Heap) -> State {
        State { expr, heap, steps: 0 }
    }

    pub fn initial(root: &Expr) -> State {
        State::new(root.clone(), Heap::new())
    }

    pub fn is_answer(&self) -> bool {
        self.expr.is_answer()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}, {}⟩", self.expr, self.heap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Opq,
    Conc,
    IfTrue,
    IfFalse,
    Prim,
    AppLam,
    AppOpq1,
    AppOpq2,
    AppOpq3,
    AppHavoc,
    AppCase1,
    AppCase2,
    Error,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Opq => "Opq",
            Rule::Conc => "Conc",
            Rule::IfTrue => "IfTrue",
            Rule::IfFalse => "IfFalse",
            Rule::Prim => "Prim",
            Rule::AppLam => "AppLam",
            Rule::AppOpq1 => "AppOpq1",
            Rule::AppOpq2 => "AppOpq2",
            Rule::AppOpq3 => "AppOpq3",
            Rule::AppHavoc => "AppHavoc",
            Rule::AppCase1 => "AppCase1",
            Rule::AppCase2 => "AppCase2",
            Rule::Error => "Error",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("no rule applies to `{0}`")]
    Stuck(Expr),
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error(transparent)]
    Heap(#[from] HeapError),
}

impl StepError {
    pub fn solver_error(self) -> Result<SolverError, StepError> {
        match self {
            StepError::Delta(DeltaError::Solver(e)) => Ok(e),
            other => Err(other),
        }
    }
}

/// One layer of an evaluation context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    /// `(if [] e1 e2)`
    IfCond(Expr, Expr),
    /// `([] e)`
    AppFn(Expr),
    /// `(L [])`
    AppArg(LocId),
    /// `(O L… [] e…)`
    PrimArg { op: Op, label: Label, done: Vec<LocId>, rest: Vec<Expr> },
}

/// Evaluation context, outermost frame first.
pub type Context = Vec<Frame>;

fn as_loc(e: &Expr) -> Option<LocId> {
    match e {
        Expr::Loc(l) => Some(*l),
        _ => None,
    }
}

/// Split a non-answer into its evaluation context and redex, evaluating
/// operators before operands and primitive arguments left to right. An
/// `err` in evaluation position is returned as the redex. Answers have no
/// decomposition.
pub fn decompose(e: &Expr) -> Option<(Context, Expr)> {
    if e.is_answer() {
        return None;
    }
    let mut ctx = Vec::new();
    let mut cur = e;
    loop {
        let next = match cur {
            Expr::If(c, t, f) if as_loc(c).is_none() => {
                ctx.push(Frame::IfCond((**t).clone(), (**f).clone()));
                &**c
            }
            Expr::App(f, a) if as_loc(f).is_none() => {
                ctx.push(Frame::AppFn((**a).clone()));
                &**f
            }
            Expr::App(f, a) if as_loc(a).is_none() => {
                ctx.push(Frame::AppArg(as_loc(f).expect("operator is a location")));
                &**a
            }
            Expr::Prim { op, args, label } => match args.iter().position(|a| as_loc(a).is_none()) {
                Some(i) => {
                    ctx.push(Frame::PrimArg {
                        op: *op,
                        label: *label,
                        done: args[..i].iter().map(|a| as_loc(a).expect("evaluated")).collect(),
                        rest: args[i + 1..].to_vec(),
                    });
                    &args[i]
                }
                None => return Some((ctx, cur.clone())),
            },
            _ => return Some((ctx, cur.clone())),
        };
        if matches!(next, Expr::Err { .. }) {
            return Some((ctx, next.clone()));
        }
        cur = next;
    }
}

pub fn plug(ctx: &[Frame], e: Expr) -> Expr {
    ctx.iter().rev().fold(e, |inner, frame| match frame {
        Frame::IfCond(t, f) => Expr::if_(inner, t.clone(), f.clone()),
        Frame::AppFn(a) => Expr::app(inner, a.clone()),
        Frame::AppArg(l) => Expr::app(Expr::Loc(*l), inner),
        Frame::PrimArg { op, label, done, rest } => {
            let mut args: Vec<Expr> = done.iter().map(|l| Expr::Loc(*l)).collect();
            args.push(inner);
            args.extend(rest.iter().cloned());
            Expr::Prim { op: *op, args, label: *label }
        }
    })
}

type Successor = (Expr, Heap, Rule);

fn reduce<S: Solver>(prover: &mut Prover<S>, redex: &Expr, h: &Heap) -> Result<Vec<Successor>, StepError> {
    let stuck = || StepError::Stuck(redex.clone());
    match redex {
        Expr::Opq { ty, label } => {
            let mut h = h.clone();
            let l = h.alloc_opaque(*label, ty.clone());
            Ok(vec![(Expr::Loc(l), h, Rule::Opq)])
        }
        Expr::Lit(n) => {
            let mut h = h.clone();
            let l = h.alloc(Storeable::Int(*n));
            Ok(vec![(Expr::Loc(l), h, Rule::Conc)])
        }
        Expr::Lam { param, ty, body } => {
            let mut h = h.clone();
            let l = h.alloc(Storeable::Lam { param: param.clone(), ty: ty.clone(), body: (**body).clone() });
            Ok(vec![(Expr::Loc(l), h, Rule::Conc)])
        }
        Expr::If(c, t, f) => {
            let c = as_loc(c).ok_or_else(stuck)?;
            let mut out = Vec::new();
            // δ answers zero? with 1 (take else) or 0 (take then).
            for r in delta(prover, h, Op::IsZero, &[c])? {
                match r {
                    DeltaResult::Val(Storeable::Int(0), h2) => out.push(((**t).clone(), h2, Rule::IfTrue)),
                    DeltaResult::Val(Storeable::Int(_), h2) => out.push(((**f).clone(), h2, Rule::IfFalse)),
                    _ => return Err(stuck()),
                }
            }
            out.sort_by_key(|s| s.2);
            Ok(out)
        }
        Expr::Prim { op, args, label } => {
            let locs: Vec<LocId> = args.iter().map(as_loc).collect::<Option<_>>().ok_or_else(stuck)?;
            let mut out = Vec::new();
            for r in delta(prover, h, *op, &locs)? {
                match r {
                    DeltaResult::Val(s, mut h2) => {
                        let l = h2.alloc(s);
                        out.push((Expr::Loc(l), h2, Rule::Prim));
                    }
                    DeltaResult::Error(op, h2) => out.push((Expr::Err { label: *label, op }, h2, Rule::Prim)),
                }
            }
            Ok(out)
        }
        Expr::App(f, x) => {
            let (f, x) = (as_loc(f).ok_or_else(stuck)?, as_loc(x).ok_or_else(stuck)?);
            apply(h, f, x).ok_or_else(stuck)?
        }
        Expr::Var(_) | Expr::Loc(_) | Expr::Err { .. } => Err(stuck()),
    }
}

fn apply(h: &Heap, f: LocId, x: LocId) -> Option<Result<Vec<Successor>, StepError>> {
    Some(match h.get(f)? {
        Storeable::Lam { param, body, .. } => Ok(vec![(body.subst(param, x), h.clone(), Rule::AppLam)]),
        Storeable::Opaque { ty: Type::Arrow(dom, cod), .. } if dom.is_base() => {
            let mut h = h.clone();
            let la = h.alloc(Storeable::opaque((**cod).clone()));
            h.extend_case(f, x, la).map(|()| vec![(Expr::Loc(la), h, Rule::AppOpq1)]).map_err(Into::into)
        }
        Storeable::Opaque { ty: Type::Arrow(dom, cod), .. } => {
            let (dom, cod) = ((**dom).clone(), (**cod).clone());
            let (t1, t2) = dom.split_arrow().map(|(a, b)| (a.clone(), b.clone()))?;
            (|| -> Result<Vec<Successor>, StepError> {
                let mut out = Vec::new();

                let mut h2 = h.clone();
                let la = h2.alloc(Storeable::opaque(cod.clone()));
                h2.update(f, Storeable::Lam { param: "x".into(), ty: dom.clone(), body: Expr::Loc(la) })?;
                out.push((Expr::Loc(la), h2, Rule::AppOpq2));

                if let Some((t3, _)) = cod.split_arrow() {
                    let mut h3 = h.clone();
                    let l1 = h3.alloc(Storeable::opaque(Type::arrow(dom.clone(), cod.clone())));
                    let v = Expr::lam(
                        "y",
                        t3.clone(),
                        Expr::app(Expr::app(Expr::Loc(l1), Expr::var("x")), Expr::var("y")),
                    );
                    h3.update(f, Storeable::Lam { param: "x".into(), ty: dom.clone(), body: v.clone() })?;
                    out.push((v.subst("x", x), h3, Rule::AppOpq3));
                }

                let mut h4 = h.clone();
                let l1 = h4.alloc(Storeable::opaque(t1));
                let l2 = h4.alloc(Storeable::opaque(Type::arrow(t2, cod)));
                let body = Expr::app(Expr::Loc(l2), Expr::app(Expr::var("x"), Expr::Loc(l1)));
                h4.update(f, Storeable::Lam { param: "x".into(), ty: dom, body: body.clone() })?;
                out.push((body.subst("x", x), h4, Rule::AppHavoc));
                Ok(out)
            })()
        }
        Storeable::Case { codomain, entries } => {
            let same_input = |input: LocId| {
                input == x || matches!((h.int_at(input), h.int_at(x)), (Some(a), Some(b)) if a == b)
            };
            if let Some((_, out)) = entries.iter().find(|(input, _)| same_input(*input)) {
                return Some(Ok(vec![(Expr::Loc(*out), h.clone(), Rule::AppCase1)]));
            }
            let mut h = h.clone();
            let la = h.alloc(Storeable::opaque(codomain.clone()));
            h.extend_case(f, x, la).map(|()| vec![(Expr::Loc(la), h, Rule::AppCase2)]).map_err(Into::into)
        }
        Storeable::Int(_) | Storeable::Opaque { .. } => return None,
    })
}

/// Every successor of `s`. Answers have none.
pub fn step<S: Solver>(prover: &mut Prover<S>, s: &State) -> Result<Vec<(State, Rule)>, StepError> {
    let Some((ctx, redex)) = decompose(&s.expr) else {
        return Ok(Vec::new());
    };
    let succs = if let Expr::Err { .. } = redex {
        vec![(redex, s.heap.clone(), Rule::Error)]
    } else {
        reduce(prover, &redex, &s.heap)?
            .into_iter()
            .map(|(e, h, r)| (plug(&ctx, e), h, r))
            .collect()
    };
    Ok(succs
        .into_iter()
        .map(|(expr, heap, rule)| (State { expr, heap, steps: s.steps + 1 }, rule))
        .collect())
}

/// Primitive-application labels reachable from `e`, following locations
/// through the heap.
pub fn compute_labels(h: &Heap, e: &Expr) -> BTreeSet<Label> {
    let mut labels = BTreeSet::new();
    let mut visited = BTreeSet::new();
    labels_expr(h, e, &mut labels, &mut visited);
    labels
}

/// Labels reachable from the storeable at `l`.
pub fn compute_labels_at(h: &Heap, l: LocId) -> BTreeSet<Label> {
    compute_labels(h, &Expr::Loc(l))
}

fn labels_expr(h: &Heap, e: &Expr, out: &mut BTreeSet<Label>, visited: &mut BTreeSet<LocId>) {
    e.walk(&mut |sub| match sub {
        Expr::Prim { label, .. } => {
            out.insert(*label);
        }
        Expr::Loc(l) => labels_loc(h, *l, out, visited),
        _ => {}
    });
}

fn labels_loc(h: &Heap, l: LocId, out: &mut BTreeSet<Label>, visited: &mut BTreeSet<LocId>) {
    if !visited.insert(l) {
        return;
    }
    match h.get(l) {
        Some(Storeable::Lam { body, .. }) => labels_expr(h, body, out, visited),
        Some(Storeable::Case { entries, .. }) => {
            for (i, o) in entries {
                labels_loc(h, *i, out, visited);
                labels_loc(h, *o, out, visited);
            }
        }
        _ => {}
    }
}
