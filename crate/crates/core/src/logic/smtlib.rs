//! SMT-LIB2 emission and an external solver reached over a child
//! process's stdin/stdout.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};

use crate::heap::{LocId, Term};

use super::{Formula, Model, SatResult, Solver, SolverError};

fn int_to_smt(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

pub fn term_to_smt(t: &Term) -> String {
    match t {
        Term::Const(n) => int_to_smt(*n),
        Term::Loc(l) => l.to_string(),
        Term::Bin(op, a, b) => format!("({} {} {})", op.symbol(), term_to_smt(a), term_to_smt(b)),
    }
}

pub fn formula_to_smt(f: &Formula) -> String {
    fn nary(op: &str, unit: &str, fs: &[Formula]) -> String {
        if fs.is_empty() {
            return unit.to_string();
        }
        let parts: Vec<String> = fs.iter().map(formula_to_smt).collect();
        format!("({op} {})", parts.join(" "))
    }
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Eq(a, b) => format!("(= {} {})", term_to_smt(a), term_to_smt(b)),
        Formula::Not(g) => format!("(not {})", formula_to_smt(g)),
        Formula::And(fs) => nary("and", "true", fs),
        Formula::Or(fs) => nary("or", "false", fs),
        Formula::Implies(a, b) => format!("(=> {} {})", formula_to_smt(a), formula_to_smt(b)),
    }
}

/// A complete, stateless query script. One `assert` per top-level conjunct.
pub fn script(logic: &str, vars: &BTreeSet<LocId>, f: &Formula) -> String {
    let mut all = vars.clone();
    f.collect_vars(&mut all);
    let mut s = String::new();
    s.push_str("(set-option :produce-models true)\n");
    s.push_str(&format!("(set-logic {logic})\n"));
    for l in &all {
        s.push_str(&format!("(declare-const {l} Int)\n"));
    }
    for c in f.conjuncts() {
        s.push_str(&format!("(assert {})\n", formula_to_smt(c)));
    }
    if matches!(f, Formula::False) {
        s.push_str("(assert false)\n");
    }
    s.push_str("(check-sat)\n(get-model)\n(exit)\n");
    s
}

/// Minimal s-expressions for reading solver output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

pub fn parse_sexps(text: &str) -> Result<Vec<Sexp>, SolverError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop().filter(|_| !stack.is_empty());
                let Some(done) = done else {
                    return Err(SolverError::Protocol("unbalanced `)`".into()));
                };
                stack.last_mut().expect("outer frame").push(Sexp::List(done));
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                let mut s = String::from("\"");
                for c in chars.by_ref() {
                    s.push(c);
                    if c == '"' {
                        break;
                    }
                }
                stack.last_mut().expect("frame").push(Sexp::Atom(s));
            }
            '|' => {
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    s.push(c);
                }
                stack.last_mut().expect("frame").push(Sexp::Atom(s));
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&n) = chars.peek() {
                    if n.is_whitespace() || n == '(' || n == ')' {
                        break;
                    }
                    s.push(n);
                    chars.next();
                }
                stack.last_mut().expect("frame").push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SolverError::Protocol("unbalanced `(`".into()));
    }
    Ok(stack.pop().expect("top frame"))
}

fn sexp_int(s: &Sexp) -> Option<i64> {
    match s {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(xs) => match xs.as_slice() {
            [Sexp::Atom(m), v] if m == "-" => sexp_int(v)?.checked_neg(),
            _ => None,
        },
    }
}

fn parse_loc(name: &str) -> Option<LocId> {
    name.strip_prefix('L')?.parse().ok().map(LocId)
}

fn collect_defines(s: &Sexp, model: &mut Model) {
    let Sexp::List(items) = s else { return };
    match items.as_slice() {
        [Sexp::Atom(d), Sexp::Atom(name), Sexp::List(args), _sort, value] if d == "define-fun" && args.is_empty() => {
            if let (Some(l), Some(v)) = (parse_loc(name), sexp_int(value)) {
                model.insert(l, v);
            }
        }
        _ => items.iter().for_each(|i| collect_defines(i, model)),
    }
}

/// Outcome of reading a solver transcript.
#[derive(Debug, PartialEq, Eq)]
pub enum Response {
    Result(SatResult),
    /// The solver reported errors before answering; carries the messages.
    Errors(Vec<String>),
}

pub fn parse_response(text: &str) -> Result<Response, SolverError> {
    let sexps = parse_sexps(text)?;
    let mut errors = Vec::new();
    for (i, s) in sexps.iter().enumerate() {
        match s {
            Sexp::Atom(a) if a == "sat" => {
                let mut model = Model::new();
                if let Some(m) = sexps.get(i + 1) {
                    collect_defines(m, &mut model);
                }
                return Ok(Response::Result(SatResult::Sat(model)));
            }
            Sexp::Atom(a) if a == "unsat" => return Ok(Response::Result(SatResult::Unsat)),
            Sexp::Atom(a) if a == "unknown" => return Ok(Response::Result(SatResult::Unknown)),
            Sexp::Atom(a) if a == "success" => {}
            Sexp::List(xs) if matches!(xs.first(), Some(Sexp::Atom(e)) if e == "error") => {
                errors.push(format!("{:?}", xs.get(1)));
            }
            other => return Err(SolverError::Protocol(format!("{other:?}"))),
        }
    }
    if errors.is_empty() {
        Err(SolverError::Protocol("no check-sat answer".into()))
    } else {
        Ok(Response::Errors(errors))
    }
}

/// External SMT-LIB2 solver; one fresh process per query.
#[derive(Clone, Debug)]
pub struct SmtProcess {
    program: PathBuf,
    args: Vec<String>,
}

impl SmtProcess {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> SmtProcess {
        SmtProcess { program: program.into(), args }
    }

    /// Default flags for well-known solvers so that they read a script from
    /// standard input.
    pub fn detect(program: impl Into<PathBuf>) -> SmtProcess {
        let program = program.into();
        let stem = program.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
        let args = if stem.starts_with("z3") {
            vec!["-in".into()]
        } else if stem.starts_with("cvc") {
            vec!["--lang=smt2".into(), "--incremental".into()]
        } else {
            Vec::new()
        };
        SmtProcess::new(program, args)
    }

    fn run(&self, input: &str) -> Result<String, SolverError> {
        let cmd = self.program.display().to_string();
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SolverError::Spawn { cmd, source })?;
        child.stdin.take().expect("piped stdin").write_all(input.as_bytes())?;
        let mut out = String::new();
        child.stdout.take().expect("piped stdout").read_to_string(&mut out)?;
        child.wait()?;
        Ok(out)
    }
}

impl Solver for SmtProcess {
    fn name(&self) -> String {
        format!("smtlib:{}", self.program.display())
    }

    fn check(&mut self, vars: &BTreeSet<LocId>, f: &Formula) -> Result<SatResult, SolverError> {
        let mut last_errors = Vec::new();
        for logic in ["QF_NIA", "ALL"] {
            match parse_response(&self.run(&script(logic, vars, f))?)? {
                Response::Result(SatResult::Sat(mut m)) => {
                    for l in vars.iter().chain(f.vars().iter()) {
                        if m.get(*l).is_none() {
                            m.insert(*l, 0);
                        }
                    }
                    return Ok(SatResult::Sat(m));
                }
                Response::Result(r) => return Ok(r),
                Response::Errors(e) => last_errors = e,
            }
        }
        Err(SolverError::Protocol(last_errors.join("; ")))
    }
}
