//! Abstract syntax of SPCF terms and types, plus the surface-syntax
//! parser, pretty-printer and simple type checker.

mod parse;
mod typeck;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::heap::LocId;

pub use parse::{parse, parse_expr, parse_type, ParseError};
pub use typeck::{typecheck, typecheck_expr, TypeError};

/// Simple types: the single base type of integers and arrows.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Int,
    Arrow(Box<Type>, Box<Type>),
}

impl Type {
    pub fn arrow(dom: Type, cod: Type) -> Type {
        Type::Arrow(Box::new(dom), Box::new(cod))
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Type::Int)
    }

    /// Domain and codomain of an arrow type.
    pub fn split_arrow(&self) -> Option<(&Type, &Type)> {
        match self {
            Type::Arrow(d, c) => Some((d, c)),
            Type::Int => None,
        }
    }

    /// Nesting depth of arrows on the left, i.e. the order of the type.
    pub fn order(&self) -> usize {
        match self {
            Type::Int => 0,
            Type::Arrow(d, c) => (d.order() + 1).max(c.order()),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Arrow(d, c) => write!(f, "({d} -> {c})"),
        }
    }
}

/// Source label of an opaque value or a primitive-application site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ℓ{}", self.0)
    }
}

/// Hands out labels that do not clash with the labels of a program.
#[derive(Clone, Debug)]
pub struct LabelSupply {
    next: u32,
}

impl LabelSupply {
    pub fn starting_at(first: u32) -> Self {
        LabelSupply { next: first }
    }

    pub fn fresh(&mut self) -> Label {
        let l = Label(self.next);
        self.next += 1;
        l
    }
}

/// Primitive operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    IsZero,
    Add1,
    Sub1,
    Add,
    Sub,
    Mul,
    Div,
    NumEq,
}

impl Op {
    pub const ALL: [Op; 8] = [
        Op::IsZero,
        Op::Add1,
        Op::Sub1,
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::NumEq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::IsZero => "zero?",
            Op::Add1 => "add1",
            Op::Sub1 => "sub1",
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "div",
            Op::NumEq => "=",
        }
    }

    pub fn from_name(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            Op::IsZero | Op::Add1 | Op::Sub1 => 1,
            _ => 2,
        }
    }

    /// Whether the operation has a precondition that can be violated.
    pub fn is_partial(self) -> bool {
        matches!(self, Op::Div)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// SPCF expressions. `Loc` and `Err` only appear in intermediate machine
/// states, never in parser output.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(String),
    Lit(i64),
    Opq { ty: Type, label: Label },
    Lam { param: String, ty: Type, body: Box<Expr> },
    App(Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Prim { op: Op, args: Vec<Expr>, label: Label },
    Loc(LocId),
    Err { label: Label, op: Op },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn lam(param: &str, ty: Type, body: Expr) -> Expr {
        Expr::Lam { param: param.to_string(), ty, body: Box::new(body) }
    }

    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Box::new(f), Box::new(a))
    }

    pub fn if_(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn prim(op: Op, args: Vec<Expr>, label: Label) -> Expr {
        Expr::Prim { op, args, label }
    }

    /// Is this a syntactic value (before allocation)?
    pub fn is_value(&self) -> bool {
        matches!(self, Expr::Lit(_) | Expr::Lam { .. } | Expr::Opq { .. })
    }

    pub fn is_answer(&self) -> bool {
        matches!(self, Expr::Loc(_) | Expr::Err { .. })
    }

    /// Capture-free substitution of a location for a variable. Only closed
    /// terms are ever substituted, so no renaming is needed.
    pub fn subst(&self, x: &str, loc: LocId) -> Expr {
        self.subst_with(x, &Expr::Loc(loc))
    }

    /// Substitute a closed expression for the free occurrences of `x`.
    pub fn subst_with(&self, x: &str, closed: &Expr) -> Expr {
        match self {
            Expr::Var(y) if y == x => closed.clone(),
            Expr::Var(_) | Expr::Lit(_) | Expr::Opq { .. } | Expr::Loc(_) | Expr::Err { .. } => {
                self.clone()
            }
            Expr::Lam { param, ty, body } => {
                if param == x {
                    self.clone()
                } else {
                    Expr::Lam {
                        param: param.clone(),
                        ty: ty.clone(),
                        body: Box::new(body.subst_with(x, closed)),
                    }
                }
            }
            Expr::App(f, a) => Expr::app(f.subst_with(x, closed), a.subst_with(x, closed)),
            Expr::If(c, t, e) => Expr::if_(
                c.subst_with(x, closed),
                t.subst_with(x, closed),
                e.subst_with(x, closed),
            ),
            Expr::Prim { op, args, label } => Expr::Prim {
                op: *op,
                args: args.iter().map(|a| a.subst_with(x, closed)).collect(),
                label: *label,
            },
        }
    }

    /// Replace every opaque whose label is bound in `bindings`.
    pub fn plug_opaques(&self, bindings: &BTreeMap<Label, Expr>) -> Expr {
        match self {
            Expr::Opq { label, .. } => bindings.get(label).cloned().unwrap_or_else(|| self.clone()),
            Expr::Var(_) | Expr::Lit(_) | Expr::Loc(_) | Expr::Err { .. } => self.clone(),
            Expr::Lam { param, ty, body } => Expr::Lam {
                param: param.clone(),
                ty: ty.clone(),
                body: Box::new(body.plug_opaques(bindings)),
            },
            Expr::App(f, a) => Expr::app(f.plug_opaques(bindings), a.plug_opaques(bindings)),
            Expr::If(c, t, e) => Expr::if_(
                c.plug_opaques(bindings),
                t.plug_opaques(bindings),
                e.plug_opaques(bindings),
            ),
            Expr::Prim { op, args, label } => Expr::Prim {
                op: *op,
                args: args.iter().map(|a| a.plug_opaques(bindings)).collect(),
                label: *label,
            },
        }
    }

    /// Visit every subexpression in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Lam { body, .. } => body.walk(f),
            Expr::App(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::If(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
            Expr::Prim { args, .. } => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    /// Locations mentioned anywhere in the expression.
    pub fn locations(&self) -> BTreeSet<LocId> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Loc(l) = e {
                out.insert(*l);
            }
        });
        out
    }

    pub fn has_opaques(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Opq { .. }));
        found
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(x) => f.write_str(x),
            Expr::Lit(n) => write!(f, "{n}"),
            Expr::Opq { ty, .. } => write!(f, "(• {ty})"),
            Expr::Lam { param, ty, body } => write!(f, "(λ ({param} : {ty}) {body})"),
            Expr::App(a, b) => write!(f, "({a} {b})"),
            Expr::If(c, t, e) => write!(f, "(if {c} {t} {e})"),
            Expr::Prim { op, args, .. } => {
                write!(f, "({op}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
            Expr::Loc(l) => write!(f, "{l}"),
            Expr::Err { label, op } => write!(f, "(err {label} {op})"),
        }
    }
}

/// A parsed program together with the label bookkeeping derived from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub root: Expr,
    /// Primitive-application sites of the known program portion.
    pub known_labels: BTreeSet<Label>,
    /// Annotated type of every source opaque.
    pub opaque_types: BTreeMap<Label, Type>,
}

impl Program {
    pub fn new(root: Expr) -> Program {
        let mut known_labels = BTreeSet::new();
        let mut opaque_types = BTreeMap::new();
        root.walk(&mut |e| match e {
            Expr::Prim { label, .. } => {
                known_labels.insert(*label);
            }
            Expr::Opq { ty, label } => {
                opaque_types.insert(*label, ty.clone());
            }
            _ => {}
        });
        Program { root, known_labels, opaque_types }
    }

    /// A label supply that never collides with labels of this program.
    pub fn label_supply(&self) -> LabelSupply {
        let max = self
            .known_labels
            .iter()
            .chain(self.opaque_types.keys())
            .map(|l| l.0)
            .max()
            .unwrap_or(0);
        LabelSupply::starting_at(max + 1)
    }

    pub fn has_opaques(&self) -> bool {
        !self.opaque_types.is_empty()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
