//! Counterexample construction: solve the heap of an erroring branch, plug
//! the model back into it, and read off a closed term for every source
//! opaque.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::heap::{Heap, LocId, Storeable};
use crate::logic::{translate_heap, Model, Prover, SatResult, Solver, SolverError};
use crate::oracle::{concrete_eval, ConcreteResult};
use crate::syntax::{Expr, Label, LabelSupply, Op, Program, Type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validation {
    Validated,
    Failed(String),
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    /// A closed, opaque-free term for every source opaque.
    pub bindings: BTreeMap<Label, Expr>,
    pub blame: Label,
    pub op: Op,
    pub model: Model,
    pub validation: Validation,
}

impl Counterexample {
    /// The program with every opaque replaced by its binding.
    pub fn instantiate(&self, p: &Program) -> Expr {
        p.root.plug_opaques(&self.bindings)
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Error: {} at {}", self.op, self.blame)?;
        writeln!(f, "Breaking context:")?;
        for (label, e) in &self.bindings {
            writeln!(f, "  • {label} = {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CexError {
    #[error("the path condition is unsatisfiable")]
    Unsat,
    #[error("the solver could not decide the path condition")]
    Unknown,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// `Base → 0`, `A -> B → λ(x : A). default(B)`.
pub fn default_value(t: &Type) -> Expr {
    match t {
        Type::Int => Expr::Lit(0),
        Type::Arrow(a, b) => Expr::lam(if a.is_base() { "x" } else { "f" }, (**a).clone(), default_value(b)),
    }
}

struct Renderer<'h> {
    heap: &'h Heap,
    model: &'h Model,
    labels: &'h mut LabelSupply,
    /// Locations on the current rendering path.
    active: BTreeSet<LocId>,
    /// Binder names handed out so far, per base name.
    names: BTreeMap<&'static str, usize>,
}

impl Renderer<'_> {
    /// `f`, `f1`, `f2`, … for function parameters and `x`, `x1`, … for
    /// integers, so that nested renderings never shadow each other.
    fn binder(&mut self, ty: &Type) -> String {
        let base = if ty.is_base() { "x" } else { "f" };
        let n = self.names.entry(base).or_insert(0);
        let name = if *n == 0 { base.to_string() } else { format!("{base}{n}") };
        *n += 1;
        name
    }

    fn int(&self, l: LocId) -> i64 {
        self.heap.int_at(l).unwrap_or_else(|| self.model.value(l))
    }

    fn value(&mut self, l: LocId) -> Expr {
        let Some(s) = self.heap.get(l) else { return Expr::Lit(self.model.value(l)) };
        if !self.active.insert(l) {
            // Only reachable through a cyclic lambda; any total value will do.
            return match s {
                Storeable::Opaque { ty, .. } => default_value(ty),
                Storeable::Case { codomain, .. } => default_value(&Type::arrow(Type::Int, codomain.clone())),
                _ => Expr::Lit(0),
            };
        }
        let e = match s {
            Storeable::Int(n) => Expr::Lit(*n),
            Storeable::Opaque { ty: Type::Int, .. } => Expr::Lit(self.model.value(l)),
            Storeable::Opaque { ty, .. } => default_value(ty),
            Storeable::Lam { param, ty, body } => {
                let name = self.binder(ty);
                let body = body.subst_with(param, &Expr::var(&name));
                Expr::Lam { param: name, ty: ty.clone(), body: Box::new(self.expr(&body)) }
            }
            Storeable::Case { codomain, entries } => {
                let mut seen = BTreeSet::new();
                let mut arms = Vec::new();
                for (input, output) in entries {
                    let k = self.int(*input);
                    if seen.insert(k) {
                        arms.push((k, self.value(*output)));
                    }
                }
                let body = arms.into_iter().rev().fold(default_value(codomain), |rest, (k, v)| {
                    let test = Expr::prim(Op::NumEq, vec![Expr::var("n"), Expr::Lit(k)], self.labels.fresh());
                    Expr::if_(test, v, rest)
                });
                Expr::lam("n", Type::Int, body)
            }
        };
        self.active.remove(&l);
        e
    }

    fn expr(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Loc(l) => self.value(*l),
            Expr::Lam { param, ty, body } => Expr::Lam { param: param.clone(), ty: ty.clone(), body: Box::new(self.expr(body)) },
            Expr::App(f, a) => Expr::app(self.expr(f), self.expr(a)),
            Expr::If(c, t, f) => Expr::if_(self.expr(c), self.expr(t), self.expr(f)),
            Expr::Prim { op, args, label } => {
                Expr::Prim { op: *op, args: args.iter().map(|a| self.expr(a)).collect(), label: *label }
            }
            Expr::Var(_) | Expr::Lit(_) | Expr::Opq { .. } | Expr::Err { .. } => e.clone(),
        }
    }
}

/// A closed term for the value at `l` under `m`. Case mappings become
/// conditionals over the model values of their inputs; `=` sites draw
/// labels from `labels`.
pub fn render_value(h: &Heap, m: &Model, l: LocId, labels: &mut LabelSupply) -> Expr {
    Renderer { heap: h, model: m, labels, active: BTreeSet::new(), names: BTreeMap::new() }.value(l)
}

/// Solve the path condition `h` of an error at `blame` and synthesize
/// bindings for the opaques of `p`. The result is not yet validated.
pub fn build_counterexample<S: Solver>(
    p: &Program,
    prover: &mut Prover<S>,
    blame: Label,
    op: Op,
    h: &Heap,
) -> Result<Counterexample, CexError> {
    let vars = h.base_locs();
    let mut model = match prover.check(&vars, &translate_heap(h))? {
        SatResult::Sat(m) => m,
        SatResult::Unsat => return Err(CexError::Unsat),
        SatResult::Unknown => return Err(CexError::Unknown),
    };
    for l in vars {
        if model.get(l).is_none() {
            model.insert(l, 0);
        }
    }
    let mut labels = p.label_supply();
    let bindings = p
        .opaque_types
        .iter()
        .map(|(label, ty)| {
            let e = match h.opaque_loc(*label) {
                Some(l) => render_value(h, &model, l, &mut labels),
                None => default_value(ty),
            };
            (*label, e)
        })
        .collect();
    Ok(Counterexample { bindings, blame, op, model, validation: Validation::Skipped })
}

/// Run the instantiated program concretely and check that it fails at the
/// blamed site with the blamed operation.
pub fn validate(p: &Program, c: &Counterexample, fuel: u64) -> Validation {
    match concrete_eval(&c.instantiate(p), fuel) {
        Ok(ConcreteResult::Err { label, op }) if label == c.blame && op == c.op => Validation::Validated,
        Ok(ConcreteResult::Err { label, op }) => Validation::Failed(format!("fails with {op} at {label} instead")),
        Ok(ConcreteResult::Value(v)) => Validation::Failed(format!("returns {v}")),
        Ok(ConcreteResult::Diverged) => Validation::Failed(format!("timeout after {fuel} steps")),
        Err(e) => Validation::Failed(e.to_string()),
    }
}
