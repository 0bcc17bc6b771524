//! A small arithmetic expression language for closed-form potentials.
//!
//! Grammar (precedence low to high): `+ -`, `* /`, unary `-`, `^` (right associative),
//! atoms: numbers, `x`, `pi`, `e`, `i`, parentheses and the calls
//! `sin cos exp sqrt abs`. Evaluation is complex; `i` is the imaginary unit.

use std::fmt;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(C64),
    Var,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

/// A parsed expression in the single variable `x`.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = lex(source)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(Error::Expression {
                offset: t.offset,
                message: format!("unexpected token {:?}", t.kind),
            });
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64) -> C64 {
        eval(&self.root, x)
    }

    /// Points of `[a, b]` where the expression may fail to be smooth: zeros of the arguments
    /// of `abs` and `sqrt`, and of bases raised to non-integer powers.
    pub fn rough_points(&self, a: f64, b: f64) -> Vec<f64> {
        let mut args = Vec::new();
        rough_args(&self.root, &mut args);
        let mut out: Vec<f64> = args.into_iter().flat_map(|u| zeros(u, a, b)).collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
        out
    }
}

fn rough_args<'a>(n: &'a Node, out: &mut Vec<&'a Node>) {
    match n {
        Node::Num(_) | Node::Var => {}
        Node::Neg(a) => rough_args(a, out),
        Node::Bin(op, a, b) => {
            if *op == Op::Pow {
                let integral = matches!(**b, Node::Num(v) if v.im == 0.0 && v.re.fract() == 0.0);
                if !integral {
                    out.push(a);
                }
            }
            rough_args(a, out);
            rough_args(b, out);
        }
        Node::Call(f, a) => {
            if matches!(f, Func::Abs | Func::Sqrt) {
                out.push(a);
            }
            rough_args(a, out);
        }
    }
}

const ZERO_SCAN: usize = 4096;

/// Zeros of `u` on `[a, b]`: sign changes of the real part (refined by bisection) that are
/// zeros of the complex value, plus sample points where `u` vanishes.
fn zeros(u: &Node, a: f64, b: f64) -> Vec<f64> {
    let xs: Vec<f64> = (0..=ZERO_SCAN)
        .map(|k| a + (b - a) * k as f64 / ZERO_SCAN as f64)
        .collect();
    let vs: Vec<C64> = xs.iter().map(|&x| eval(u, x)).collect();
    let scale = vs.iter().map(|v| v.norm()).filter(|v| v.is_finite()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = xs
        .iter()
        .zip(&vs)
        .filter(|(_, v)| v.norm() <= 1e-12 * scale)
        .map(|(&x, _)| x)
        .collect();
    for k in 0..ZERO_SCAN {
        let (mut lo, mut hi) = (xs[k], xs[k + 1]);
        let (flo, fhi) = (vs[k].re, vs[k + 1].re);
        if !(flo * fhi < 0.0) {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            if eval(u, mid).re * flo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        if eval(u, x).norm() <= 1e-8 * scale {
            out.push(x);
        }
    }
    out
}

fn eval(n: &Node, x: f64) -> C64 {
    match n {
        Node::Num(z) => *z,
        Node::Var => C64::new(x, 0.0),
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (u, v) = (eval(a, x), eval(b, x));
            match op {
                Op::Add => u + v,
                Op::Sub => u - v,
                Op::Mul => u * v,
                Op::Div => u / v,
                Op::Pow => pow(u, v),
            }
        }
        Node::Call(f, a) => {
            let u = eval(a, x);
            match f {
                Func::Sin => u.sin(),
                Func::Cos => u.cos(),
                Func::Exp => u.exp(),
                Func::Sqrt => {
                    if u.im == 0.0 && u.re >= 0.0 {
                        C64::new(u.re.sqrt(), 0.0)
                    } else {
                        u.sqrt()
                    }
                }
                Func::Abs => C64::new(u.norm(), 0.0),
            }
        }
    }
}

fn pow(u: C64, v: C64) -> C64 {
    if v.im == 0.0 {
        if v.re.fract() == 0.0 && v.re.abs() <= 64.0 {
            return u.powi(v.re as i32);
        }
        if u.im == 0.0 && u.re >= 0.0 {
            return C64::new(u.re.powf(v.re), 0.0);
        }
        return u.powf(v.re);
    }
    if u == C64::new(0.0, 0.0) {
        return u;
    }
    u.powc(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    offset: usize,
}

fn lex(s: &str) -> Result<Vec<Token>> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    // exponent only if followed by a digit or a signed digit
                    let j = i + 1;
                    let signed = j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-');
                    let k = if signed { j + 1 } else { j };
                    if k < bytes.len() && (bytes[k] as char).is_ascii_digit() {
                        i = k;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &s[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Expression {
                    offset: start,
                    message: format!("bad number {text:?}"),
                })?;
                out.push(Token {
                    kind: Tok::Num(v),
                    offset: start,
                });
                continue;
            }
            _ if c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Token {
                    kind: Tok::Ident(s[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                return Err(Error::Expression {
                    offset: start,
                    message: format!("unexpected character {c:?}"),
                })
            }
        };
        i += c.len_utf8();
        out.push(Token { kind, offset: start });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.offset)
            .unwrap_or_else(|| self.tokens.last().map(|t| t.offset + 1).unwrap_or(0))
    }

    fn err<T>(&self, message: &str) -> Result<T> {
        Err(Error::Expression {
            offset: self.offset(),
            message: message.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => Op::Add,
                Some(Tok::Minus) => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => Op::Mul,
                Some(Tok::Slash) => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            // right associative; allows 2^-x
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(C64::new(v, 0.0))),
            Tok::LParen => {
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::Var),
                "pi" => Ok(Node::Num(C64::new(std::f64::consts::PI, 0.0))),
                "e" => Ok(Node::Num(C64::new(std::f64::consts::E, 0.0))),
                "i" => Ok(Node::Num(C64::new(0.0, 1.0))),
                "sin" | "cos" | "exp" | "sqrt" | "abs" => {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "sqrt" => Func::Sqrt,
                        _ => Func::Abs,
                    };
                    if self.peek() != Some(&Tok::LParen) {
                        return self.err("expected '(' after function name");
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(&Tok::RParen) {
                        return self.err("expected ')'");
                    }
                    self.pos += 1;
                    Ok(Node::Call(f, Box::new(arg)))
                }
                _ => {
                    self.pos -= 1;
                    self.err(&format!("unknown identifier {name:?}"))
                }
            },
            _ => {
                self.pos -= 1;
                self.err("expected a value")
            }
        }
    }
}
