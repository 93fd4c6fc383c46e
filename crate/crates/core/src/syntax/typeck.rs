use thiserror::Error;

use super::{Expr, Program, Type};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("in `{term}`: expected {expected}, found {found}")]
    Mismatch { term: String, expected: Type, found: Type },
    #[error("`{term}` has type {found} and cannot be applied")]
    NotAFunction { term: String, found: Type },
    #[error("`{op}` expects {expected} argument(s), got {found} in `{term}`")]
    Arity { term: String, op: String, expected: usize, found: usize },
    #[error("internal form `{0}` in source program")]
    Internal(String),
}

type Env<'a> = Vec<(&'a str, &'a Type)>;

fn check<'a>(env: &mut Env<'a>, e: &'a Expr) -> Result<Type, TypeError> {
    match e {
        Expr::Var(x) => env
            .iter()
            .rev()
            .find(|(y, _)| y == x)
            .map(|(_, t)| (*t).clone())
            .ok_or_else(|| TypeError::Unbound(x.clone())),
        Expr::Lit(_) => Ok(Type::Int),
        Expr::Opq { ty, .. } => Ok(ty.clone()),
        Expr::Lam { param, ty, body } => {
            env.push((param, ty));
            let body_ty = check(env, body);
            env.pop();
            Ok(Type::arrow(ty.clone(), body_ty?))
        }
        Expr::App(f, a) => {
            let fty = check(env, f)?;
            let aty = check(env, a)?;
            match fty {
                Type::Arrow(dom, cod) => {
                    if *dom == aty {
                        Ok(*cod)
                    } else {
                        Err(TypeError::Mismatch { term: e.to_string(), expected: *dom, found: aty })
                    }
                }
                Type::Int => Err(TypeError::NotAFunction { term: f.to_string(), found: fty }),
            }
        }
        Expr::If(c, t, f) => {
            let cty = check(env, c)?;
            if cty != Type::Int {
                return Err(TypeError::Mismatch { term: c.to_string(), expected: Type::Int, found: cty });
            }
            let tty = check(env, t)?;
            let fty = check(env, f)?;
            if tty != fty {
                return Err(TypeError::Mismatch { term: e.to_string(), expected: tty, found: fty });
            }
            Ok(tty)
        }
        Expr::Prim { op, args, .. } => {
            if args.len() != op.arity() {
                return Err(TypeError::Arity {
                    term: e.to_string(),
                    op: op.name().to_string(),
                    expected: op.arity(),
                    found: args.len(),
                });
            }
            for a in args {
                let t = check(env, a)?;
                if t != Type::Int {
                    return Err(TypeError::Mismatch { term: a.to_string(), expected: Type::Int, found: t });
                }
            }
            Ok(Type::Int)
        }
        Expr::Loc(_) | Expr::Err { .. } => Err(TypeError::Internal(e.to_string())),
    }
}

/// Type of a closed source expression.
pub fn typecheck_expr(e: &Expr) -> Result<Type, TypeError> {
    check(&mut Vec::new(), e)
}

pub fn typecheck(p: &Program) -> Result<Type, TypeError> {
    typecheck_expr(&p.root)
}
