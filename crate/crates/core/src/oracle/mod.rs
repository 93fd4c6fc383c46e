//! Trusted baselines used to test the symbolic engine: a direct
//! environment-based interpreter, a bounded enumerator of concrete
//! instantiations for opaque values, and a bounded checker for the
//! approximation relation between concrete and abstract states.

mod approx;
mod differential;

use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::heap::ArithOp;
use crate::syntax::{Expr, Label, LabelSupply, Op, Type};

pub use approx::{check_instantiation, instantiate, InstantiationWitness, NoWitness};
pub use differential::{differential, observe_concrete, observe_machine, Differential, Observation};

/// First label handed out to `=` sites inside enumerated terms; far above
/// any label a source program will use.
pub const ENUM_LABEL_BASE: u32 = 1 << 30;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConcreteValue {
    Int(i64),
    Closure { param: String, ty: Type },
}

impl fmt::Display for ConcreteValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcreteValue::Int(n) => write!(f, "{n}"),
            ConcreteValue::Closure { param, ty } => write!(f, "#<λ ({param} : {ty})>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConcreteResult {
    Value(ConcreteValue),
    Err { label: Label, op: Op },
    Diverged,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("opaque value {0} in a concrete program")]
    Opaque(Label),
    #[error("integer overflow in `{0}`")]
    Overflow(Op),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("ill-typed term `{0}`")]
    Stuck(String),
}

#[derive(Clone)]
enum V<'a> {
    Int(i64),
    Clo(Rc<Closure<'a>>),
}

struct Closure<'a> {
    param: &'a str,
    ty: &'a Type,
    body: &'a Expr,
    env: Env<'a>,
}

#[derive(Clone, Default)]
struct Env<'a>(Option<Rc<(&'a str, V<'a>, Env<'a>)>>);

impl<'a> Env<'a> {
    fn bind(&self, x: &'a str, v: V<'a>) -> Env<'a> {
        Env(Some(Rc::new((x, v, self.clone()))))
    }

    fn lookup(&self, x: &str) -> Option<V<'a>> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.0 == x {
                return Some(node.1.clone());
            }
            cur = &node.2 .0;
        }
        None
    }
}

enum Halt {
    Err(Label, Op),
    OutOfFuel,
    Fail(EvalError),
}

struct Interp {
    fuel: u64,
}

impl Interp {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.fuel == 0 {
            return Err(Halt::OutOfFuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn int(v: V<'_>, e: &Expr) -> Result<i64, Halt> {
        match v {
            V::Int(n) => Ok(n),
            V::Clo(_) => Err(Halt::Fail(EvalError::Stuck(e.to_string()))),
        }
    }

    fn eval<'a>(&mut self, e: &'a Expr, env: &Env<'a>) -> Result<V<'a>, Halt> {
        self.tick()?;
        match e {
            Expr::Var(x) => env.lookup(x).ok_or_else(|| Halt::Fail(EvalError::Unbound(x.clone()))),
            Expr::Lit(n) => Ok(V::Int(*n)),
            Expr::Lam { param, ty, body } => Ok(V::Clo(Rc::new(Closure { param, ty, body, env: env.clone() }))),
            Expr::App(f, a) => {
                let fv = self.eval(f, env)?;
                let av = self.eval(a, env)?;
                match fv {
                    V::Clo(c) => {
                        let env = c.env.bind(c.param, av);
                        self.eval(c.body, &env)
                    }
                    V::Int(_) => Err(Halt::Fail(EvalError::Stuck(e.to_string()))),
                }
            }
            Expr::If(c, t, f) => {
                if Self::int(self.eval(c, env)?, c)? != 0 {
                    self.eval(t, env)
                } else {
                    self.eval(f, env)
                }
            }
            Expr::Prim { op, args, label } => {
                let mut ns = Vec::with_capacity(args.len());
                for a in args {
                    ns.push(Self::int(self.eval(a, env)?, a)?);
                }
                let arith = |aop: ArithOp, a: i64, b: i64| aop.apply(a, b).ok_or(Halt::Fail(EvalError::Overflow(*op)));
                Ok(V::Int(match (op, ns.as_slice()) {
                    (Op::IsZero, [a]) => i64::from(*a == 0),
                    (Op::Add1, [a]) => arith(ArithOp::Add, *a, 1)?,
                    (Op::Sub1, [a]) => arith(ArithOp::Sub, *a, 1)?,
                    (Op::Add, [a, b]) => arith(ArithOp::Add, *a, *b)?,
                    (Op::Sub, [a, b]) => arith(ArithOp::Sub, *a, *b)?,
                    (Op::Mul, [a, b]) => arith(ArithOp::Mul, *a, *b)?,
                    (Op::Div, [_, 0]) => return Err(Halt::Err(*label, Op::Div)),
                    (Op::Div, [a, b]) => arith(ArithOp::Div, *a, *b)?,
                    (Op::NumEq, [a, b]) => i64::from(a == b),
                    _ => return Err(Halt::Fail(EvalError::Stuck(e.to_string()))),
                }))
            }
            Expr::Opq { label, .. } => Err(Halt::Fail(EvalError::Opaque(*label))),
            Expr::Loc(_) | Expr::Err { .. } => Err(Halt::Fail(EvalError::Stuck(e.to_string()))),
        }
    }
}

/// Call-by-value evaluation of a closed, opaque-free term. `fuel` bounds
/// the number of evaluation steps.
pub fn concrete_eval(e: &Expr, fuel: u64) -> Result<ConcreteResult, EvalError> {
    let mut interp = Interp { fuel };
    match interp.eval(e, &Env::default()) {
        Ok(V::Int(n)) => Ok(ConcreteResult::Value(ConcreteValue::Int(n))),
        Ok(V::Clo(c)) => Ok(ConcreteResult::Value(ConcreteValue::Closure {
            param: c.param.to_string(),
            ty: c.ty.clone(),
        })),
        Err(Halt::Err(label, op)) => Ok(ConcreteResult::Err { label, op }),
        Err(Halt::OutOfFuel) => Ok(ConcreteResult::Diverged),
        Err(Halt::Fail(e)) => Err(e),
    }
}

/// Closed terms of type `t`: the integers in `-bound..=bound` at base type,
/// and at function types the shapes that opaque application distinguishes.
///
/// * `int -> T`: constant functions, and for base `T` also functions that
///   single out one input (`λn. if (= n k) v c`).
/// * `(A -> B) -> T`: constant functions, `λf. (f v)` when `B = T`, and
///   `λf. (k (f v))` with `k` and `v` drawn at bound `min(bound, 2)`.
pub fn enumerate(t: &Type, bound: u32) -> Vec<Expr> {
    let mut labels = LabelSupply::starting_at(ENUM_LABEL_BASE);
    enumerate_with(t, bound, &mut labels)
}

fn enumerate_with(t: &Type, bound: u32, labels: &mut LabelSupply) -> Vec<Expr> {
    let b = i64::from(bound);
    match t {
        Type::Int => (-b..=b).map(Expr::Lit).collect(),
        Type::Arrow(dom, cod) if dom.is_base() => {
            let outputs = enumerate_with(cod, bound, labels);
            let mut out: Vec<Expr> = outputs.iter().map(|v| Expr::lam("n", Type::Int, v.clone())).collect();
            if cod.is_base() {
                for k in -b..=b {
                    for v in -b..=b {
                        for c in (-b..=b).filter(|c| *c != v) {
                            let test = Expr::prim(Op::NumEq, vec![Expr::var("n"), Expr::Lit(k)], labels.fresh());
                            out.push(Expr::lam("n", Type::Int, Expr::if_(test, Expr::Lit(v), Expr::Lit(c))));
                        }
                    }
                }
            }
            out
        }
        Type::Arrow(dom, cod) => {
            let (a, b_ty) = dom.split_arrow().expect("higher-order domain");
            let mut out: Vec<Expr> = enumerate_with(cod, bound, labels)
                .into_iter()
                .map(|c| Expr::lam("f", (**dom).clone(), c))
                .collect();
            let small = bound.min(2);
            let args = enumerate_with(a, small, labels);
            if b_ty == &**cod {
                for v in &args {
                    out.push(Expr::lam("f", (**dom).clone(), Expr::app(Expr::var("f"), v.clone())));
                }
            }
            let contexts = enumerate_with(&Type::arrow(b_ty.clone(), (**cod).clone()), small, labels);
            for k in &contexts {
                for v in &args {
                    out.push(Expr::lam(
                        "f",
                        (**dom).clone(),
                        Expr::app(k.clone(), Expr::app(Expr::var("f"), v.clone())),
                    ));
                }
            }
            out
        }
    }
}
