//! Shared support for the integration suites: a seeded generator of
//! well-typed programs and a few drivers around the library.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spcf::logic::{Prover, Solver};
use spcf::machine::{step, State};
use spcf::syntax::{parse, parse_type, Expr, Label, Op, Program, Type};

pub fn ty(s: &str) -> Type {
    parse_type(s).unwrap()
}

/// Random well-typed programs. Opaques are drawn only at the configured
/// types; literals stay within `-lit..=lit`.
pub struct Gen {
    rng: ChaCha8Rng,
    pub opaque_types: Vec<Type>,
    pub opaque_rate: f64,
    pub lit: i64,
    fresh: usize,
}

impl Gen {
    pub fn new(seed: u64, opaque_types: &[&str]) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            opaque_types: opaque_types.iter().map(|t| ty(t)).collect(),
            opaque_rate: 0.35,
            lit: 3,
            fresh: 0,
        }
    }

    /// A closed program of type `t`, labelled by going through the parser.
    pub fn program(&mut self, t: &Type, depth: u32) -> Program {
        self.fresh = 0;
        let e = self.expr(t, &mut Vec::new(), depth);
        parse(&e.to_string()).unwrap_or_else(|err| panic!("generated text does not parse: {err}\n{e}"))
    }

    /// Like [`Gen::program`] but retried until it has at least one opaque
    /// and one partial primitive.
    pub fn interesting_program(&mut self, t: &Type, depth: u32) -> Program {
        loop {
            let p = self.program(t, depth);
            let mut partial = false;
            p.root.walk(&mut |e| partial |= matches!(e, Expr::Prim { op: Op::Div, .. }));
            if p.has_opaques() && partial {
                return p;
            }
        }
    }

    fn name(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    fn opaque_ok(&self, t: &Type) -> bool {
        self.opaque_types.contains(t)
    }

    fn leaf(&mut self, t: &Type, env: &mut Vec<(String, Type)>) -> Expr {
        let vars: Vec<String> = env.iter().filter(|(_, vt)| vt == t).map(|(x, _)| x.clone()).collect();
        if self.opaque_ok(t) && self.rng.gen_bool(self.opaque_rate) {
            return Expr::Opq { ty: t.clone(), label: Label(0) };
        }
        if !vars.is_empty() && self.rng.gen_bool(0.6) {
            return Expr::var(vars.choose(&mut self.rng).unwrap());
        }
        match t {
            Type::Int => Expr::Lit(self.rng.gen_range(-self.lit..=self.lit)),
            Type::Arrow(a, b) => self.lambda(a, b, env, 0),
        }
    }

    fn lambda(&mut self, a: &Type, b: &Type, env: &mut Vec<(String, Type)>, depth: u32) -> Expr {
        let x = self.name();
        env.push((x.clone(), a.clone()));
        let body = self.expr(b, env, depth);
        env.pop();
        Expr::lam(&x, a.clone(), body)
    }

    fn arg_type(&mut self) -> Type {
        if self.rng.gen_bool(0.7) {
            Type::Int
        } else {
            ty("int -> int")
        }
    }

    pub fn expr(&mut self, t: &Type, env: &mut Vec<(String, Type)>, depth: u32) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.2) {
            return self.leaf(t, env);
        }
        let d = depth - 1;
        match t {
            Type::Int => match self.rng.gen_range(0..10) {
                0 | 1 => {
                    let op = *[Op::Add1, Op::Sub1, Op::IsZero].choose(&mut self.rng).unwrap();
                    Expr::prim(op, vec![self.expr(t, env, d)], Label(0))
                }
                2..=4 => {
                    let op = *[Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Div, Op::NumEq].choose(&mut self.rng).unwrap();
                    Expr::prim(op, vec![self.expr(t, env, d), self.expr(t, env, d)], Label(0))
                }
                5 | 6 => Expr::if_(self.expr(&Type::Int, env, d), self.expr(t, env, d), self.expr(t, env, d)),
                _ => self.application(t, env, d),
            },
            Type::Arrow(a, b) => match self.rng.gen_range(0..6) {
                0..=2 => self.lambda(a, b, env, d),
                3 => Expr::if_(self.expr(&Type::Int, env, d), self.expr(t, env, d), self.expr(t, env, d)),
                _ => self.application(t, env, d),
            },
        }
    }

    fn application(&mut self, t: &Type, env: &mut Vec<(String, Type)>, d: u32) -> Expr {
        let a = self.arg_type();
        let f = self.expr(&Type::arrow(a.clone(), t.clone()), env, d);
        let x = self.expr(&a, env, d);
        Expr::app(f, x)
    }
}

/// Drive a state without opaques to its end; such states never branch.
pub fn run_concrete<S: Solver>(prover: &mut Prover<S>, mut s: State, max_steps: u64) -> Option<State> {
    for _ in 0..max_steps {
        if s.is_answer() || matches!(s.expr, Expr::Err { .. }) {
            return Some(s);
        }
        let mut next = step(prover, &s).ok()?;
        if next.len() != 1 {
            return None;
        }
        s = next.pop().unwrap().0;
    }
    None
}

/// Programs separated by blank lines; `;` starts a comment.
pub fn corpus(text: &str) -> Vec<Program> {
    text.split("\n\n")
        .map(str::trim)
        .filter(|chunk| chunk.lines().any(|l| !l.trim().is_empty() && !l.trim_start().starts_with(';')))
        .map(|chunk| parse(chunk).unwrap_or_else(|e| panic!("{e}\n{chunk}")))
        .collect()
}
