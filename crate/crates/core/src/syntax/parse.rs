use thiserror::Error;

use super::{Expr, Label, Op, Program, Type};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Colon,
    Arrow,
    Atom(String),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | ';' | ':' | '→')
}

fn lex(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: start.0, col: start.1 });
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == ';' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        match c {
            '(' | '[' => push(&mut out, Tok::Open),
            ')' | ']' => push(&mut out, Tok::Close),
            ':' => push(&mut out, Tok::Colon),
            '→' => push(&mut out, Tok::Arrow),
            '-' if chars.get(i + 1) == Some(&'>') => {
                push(&mut out, Tok::Arrow);
                i += 2;
                col += 2;
                continue;
            }
            _ => {
                let mut s = String::new();
                while i < chars.len() && !is_delim(chars[i]) && !(chars[i] == '-' && chars.get(i + 1) == Some(&'>')) {
                    s.push(chars[i]);
                    i += 1;
                    col += 1;
                }
                push(&mut out, Tok::Atom(s));
                continue;
            }
        }
        i += 1;
        col += 1;
    }
    out
}

const LAMBDA: [&str; 2] = ["λ", "lambda"];
const OPAQUE: [&str; 2] = ["•", "opq"];

fn reserved(s: &str) -> bool {
    LAMBDA.contains(&s) || OPAQUE.contains(&s) || s == "if" || s == "int" || Op::from_name(s).is_some()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
    next_label: u32,
}

impl Parser {
    fn new(text: &str) -> Parser {
        let toks = lex(text);
        let line = text.lines().count().max(1);
        let col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        Parser { toks, pos: 0, end: (line, col), next_label: 1 }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self.end,
        };
        Err(ParseError { line, col, message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn fresh_label(&mut self) -> Label {
        let l = Label(self.next_label);
        self.next_label += 1;
        l
    }

    fn at_eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        match self.peek() {
            Some(Tok::Atom(a)) if a == "int" => {
                self.pos += 1;
                Ok(Type::Int)
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let first = self.ty()?;
                if self.peek() != Some(&Tok::Arrow) {
                    return self.err("expected `->` in function type");
                }
                let ty = self.arrow_chain(first)?;
                self.expect(Tok::Close, "`)` closing type")?;
                Ok(ty)
            }
            _ => self.err("expected a type"),
        }
    }

    /// `first -> T2 -> … -> Tn`, associating to the right.
    fn arrow_chain(&mut self, first: Type) -> Result<Type, ParseError> {
        let mut parts = vec![first];
        while self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            parts.push(self.ty()?);
        }
        let mut ty = parts.pop().expect("nonempty");
        while let Some(d) = parts.pop() {
            ty = Type::arrow(d, ty);
        }
        Ok(ty)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            None => self.err("unexpected end of input"),
            Some(Tok::Close) => self.err("unexpected `)`"),
            Some(Tok::Colon) | Some(Tok::Arrow) => self.err("unexpected token"),
            Some(Tok::Atom(a)) => {
                self.pos += 1;
                if let Ok(n) = a.parse::<i64>() {
                    return Ok(Expr::Lit(n));
                }
                if a.starts_with(|c: char| c.is_ascii_digit()) || (a.starts_with('-') && a.len() > 1 && a[1..].starts_with(|c: char| c.is_ascii_digit())) {
                    self.pos -= 1;
                    return self.err(format!("invalid integer literal `{a}`"));
                }
                if reserved(&a) {
                    self.pos -= 1;
                    return self.err(format!("`{a}` is reserved and cannot be used as a variable"));
                }
                Ok(Expr::Var(a))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let head = match self.peek() {
                    Some(Tok::Atom(a)) => Some(a.clone()),
                    _ => None,
                };
                match head.as_deref() {
                    Some(h) if OPAQUE.contains(&h) => {
                        let label = self.fresh_label();
                        self.pos += 1;
                        let ty = self.ty()?;
                        self.expect(Tok::Close, "`)` closing opaque")?;
                        Ok(Expr::Opq { ty, label })
                    }
                    Some(h) if LAMBDA.contains(&h) => {
                        self.pos += 1;
                        self.expect(Tok::Open, "`(` before lambda parameter")?;
                        let param = match self.bump() {
                            Some(Tok::Atom(x)) if !reserved(&x) && x.parse::<i64>().is_err() => x,
                            _ => {
                                self.pos -= 1;
                                return self.err("expected parameter name");
                            }
                        };
                        self.expect(Tok::Colon, "`:` after parameter")?;
                        let ty = self.ty()?;
                        self.expect(Tok::Close, "`)` after parameter type")?;
                        let body = self.expr()?;
                        self.expect(Tok::Close, "`)` closing lambda")?;
                        Ok(Expr::Lam { param, ty, body: Box::new(body) })
                    }
                    Some("if") => {
                        self.pos += 1;
                        let c = self.expr()?;
                        let t = self.expr()?;
                        let e = self.expr()?;
                        self.expect(Tok::Close, "`)` closing if")?;
                        Ok(Expr::if_(c, t, e))
                    }
                    Some(h) if Op::from_name(h).is_some() && self.peek_at(1) != Some(&Tok::Close) => {
                        let op = Op::from_name(h).expect("checked");
                        let label = self.fresh_label();
                        self.pos += 1;
                        let mut args = Vec::new();
                        while self.peek() != Some(&Tok::Close) {
                            if self.at_eof() {
                                return self.err("unexpected end of input in primitive application");
                            }
                            args.push(self.expr()?);
                        }
                        self.pos += 1;
                        Ok(Expr::Prim { op, args, label })
                    }
                    _ => {
                        let mut f = self.expr()?;
                        if self.peek() == Some(&Tok::Close) {
                            return self.err("application needs an argument");
                        }
                        while self.peek() != Some(&Tok::Close) {
                            if self.at_eof() {
                                return self.err("unexpected end of input in application");
                            }
                            let a = self.expr()?;
                            f = Expr::app(f, a);
                        }
                        self.pos += 1;
                        Ok(f)
                    }
                }
            }
        }
    }
}

/// Parse a whole program. Opaques and primitive sites are labelled
/// `ℓ1, ℓ2, …` in left-to-right order of their opening parenthesis.
pub fn parse(text: &str) -> Result<Program, ParseError> {
    Ok(Program::new(parse_expr(text)?))
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text);
    let e = p.expr()?;
    if !p.at_eof() {
        return p.err("trailing input after expression");
    }
    Ok(e)
}

/// A type, with the outermost parentheses of an arrow optional.
pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new(text);
    let first = p.ty()?;
    let t = p.arrow_chain(first)?;
    if !p.at_eof() {
        return p.err("trailing input after type");
    }
    Ok(t)
}
