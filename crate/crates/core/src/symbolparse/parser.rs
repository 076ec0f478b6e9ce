use num_complex::Complex64 as C64;

use super::expr::Expr;
use crate::error::{Error, Result};
use crate::mobius::Mobius;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(text: &'a str) -> Result<Vec<(usize, Tok)>> {
        let mut lx = Lexer { src: text.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let start = lx.pos;
            let Some(&c) = lx.src.get(lx.pos) else {
                out.push((start, Tok::End));
                return Ok(out);
            };
            let tok = if c.is_ascii_digit() || c == b'.' {
                lx.number()?
            } else if c.is_ascii_alphabetic() || c == b'_' {
                while lx.src.get(lx.pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_') {
                    lx.pos += 1;
                }
                Tok::Ident(text[start..lx.pos].to_string())
            } else if b"+-*/^(),".contains(&c) {
                lx.pos += 1;
                Tok::Op(c as char)
            } else {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax { pos: start, msg: format!("unexpected character `{ch}`") });
            };
            out.push((start, tok));
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<Tok> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(Error::Syntax { pos: start, msg: "malformed number".into() });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent; `2e` stays a syntax error downstream
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let v: f64 = text
            .parse()
            .map_err(|_| Error::Syntax { pos: start, msg: format!("malformed number `{text}`") })?;
        let imag = self.src.get(self.pos) == Some(&b'i')
            && !self.src.get(self.pos + 1).is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_');
        if imag {
            self.pos += 1;
            Ok(Tok::Imag(v))
        } else {
            Ok(Tok::Num(v))
        }
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{op}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = fold(lhs + self.term()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = fold(lhs - self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = fold(lhs * self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = fold(lhs / self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(fold(-self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let neg = if *self.peek() == Tok::Op('-') {
            self.bump();
            true
        } else {
            false
        };
        let pos = self.pos();
        match self.bump() {
            Tok::Num(k) if k.fract() == 0.0 && k <= i32::MAX as f64 => {
                let k = if neg { -(k as i32) } else { k as i32 };
                Ok(fold(Expr::PowInt(Box::new(base), k)))
            }
            _ => Err(Error::Syntax {
                pos,
                msg: "exponent after `^` must be an integer literal; use pow(c - z, s)".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::c(v)),
            Tok::Imag(v) => Ok(Expr::Const(C64::new(0.0, v))),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::Op('(') {
                    self.bump();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::Op(')') {
                        loop {
                            args.push(self.expr()?);
                            if *self.peek() == Tok::Op(',') {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(')')?;
                    return call(&name, args);
                }
                match name.as_str() {
                    "z" => Ok(Expr::Z),
                    "i" => Ok(Expr::Const(C64::new(0.0, 1.0))),
                    "pi" => Ok(Expr::c(std::f64::consts::PI)),
                    "e" => Ok(Expr::c(std::f64::consts::E)),
                    _ => Err(Error::Syntax { pos, msg: format!("unknown identifier `{name}`") }),
                }
            }
            Tok::End => Err(Error::Syntax { pos, msg: "unexpected end of input".into() }),
            t => Err(Error::Syntax { pos, msg: format!("unexpected token {t:?}") }),
        }
    }
}

fn arity(name: &str, msg: impl Into<String>) -> Error {
    Error::Arity { name: name.to_string(), msg: msg.into() }
}

fn constant_arg(name: &str, e: &Expr, what: &str) -> Result<C64> {
    match e {
        Expr::Const(c) => Ok(*c),
        _ => Err(arity(name, format!("{what} must be a constant"))),
    }
}

/// `p0 + p1 z` when the tree is affine in `z`.
pub(crate) fn as_affine(e: &Expr) -> Option<(C64, C64)> {
    Some(match e {
        Expr::Const(c) => (*c, ZERO),
        Expr::Z => (ZERO, C64::new(1.0, 0.0)),
        Expr::Neg(a) => {
            let (p0, p1) = as_affine(a)?;
            (-p0, -p1)
        }
        Expr::Add(a, b) => {
            let (a0, a1) = as_affine(a)?;
            let (b0, b1) = as_affine(b)?;
            (a0 + b0, a1 + b1)
        }
        Expr::Sub(a, b) => {
            let (a0, a1) = as_affine(a)?;
            let (b0, b1) = as_affine(b)?;
            (a0 - b0, a1 - b1)
        }
        Expr::Mul(a, b) => match (a.as_ref(), b.as_ref()) {
            (Expr::Const(c), x) | (x, Expr::Const(c)) => {
                let (p0, p1) = as_affine(x)?;
                (c * p0, c * p1)
            }
            _ => return None,
        },
        Expr::Div(a, b) => match b.as_ref() {
            Expr::Const(c) => {
                let (p0, p1) = as_affine(a)?;
                (p0 / c, p1 / c)
            }
            _ => return None,
        },
        Expr::Poly(c) if c.len() <= 2 => (c[0], c.get(1).copied().unwrap_or(ZERO)),
        _ => return None,
    })
}

fn call(name: &str, args: Vec<Expr>) -> Result<Expr> {
    let want = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(arity(name, format!("expected {n} argument(s), got {}", args.len())))
        }
    };
    let mut it = args.clone().into_iter();
    match name {
        "exp" => {
            want(1)?;
            Ok(fold(Expr::Exp(Box::new(it.next().unwrap()))))
        }
        "log" => {
            want(1)?;
            Ok(fold(Expr::Log(Box::new(it.next().unwrap()))))
        }
        "pow" => {
            want(2)?;
            let base = it.next().unwrap();
            let s = constant_arg(name, &it.next().unwrap(), "exponent")?;
            let (p0, p1) = as_affine(&base)
                .ok_or_else(|| arity(name, "base must be affine in z, e.g. pow(1 - z, 0.5)"))?;
            if p1 == ZERO {
                return Ok(fold(Expr::Pow { p0, p1, s }));
            }
            if p0 == ZERO || (p0 / p1).norm() < 1.0 - 1e-12 {
                return Err(arity(name, "base must not vanish inside the open unit disk"));
            }
            Ok(Expr::Pow { p0, p1, s })
        }
        "poly" => {
            if args.is_empty() {
                return Err(arity(name, "expected at least one coefficient"));
            }
            let c = args
                .iter()
                .map(|a| constant_arg(name, a, "coefficients"))
                .collect::<Result<Vec<_>>>()?;
            Ok(fold(Expr::Poly(c)))
        }
        "compose" => {
            want(5)?;
            let inner = it.next().unwrap();
            let k = args[1..]
                .iter()
                .map(|a| constant_arg(name, a, "matrix entries"))
                .collect::<Result<Vec<_>>>()?;
            let raw = Mobius { alpha: k[0], beta: k[1], gamma: k[2], delta: k[3] };
            let m = if (raw.det() - 1.0).norm() < 1e-13 {
                raw
            } else {
                Mobius::new(k[0], k[1], k[2], k[3]).map_err(|e| arity(name, e.to_string()))?
            };
            Ok(fold(Expr::Compose(Box::new(inner), m)))
        }
        _ => Err(arity(name, "unknown function; expected exp, log, pow, poly or compose")),
    }
}

/// Replaces a `z`-free node by its value.
fn fold(e: Expr) -> Expr {
    if matches!(e, Expr::Const(_)) || !e.is_const() {
        return e;
    }
    Expr::Const(e.eval(ZERO))
}

/// Parses a weight expression; see `docs/grammar.md`.
pub fn parse(text: &str) -> Result<Expr> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Parses an expression that must not depend on `z`.
pub fn parse_constant(text: &str) -> Result<C64> {
    match parse(text)? {
        Expr::Const(c) => Ok(c),
        _ => Err(Error::Syntax { pos: 0, msg: format!("`{}` is not a constant", text.trim()) }),
    }
}
