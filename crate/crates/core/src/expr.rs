//! Arithmetic expressions over one real variable with complex values.
//!
//! Grammar (Pratt, loosest to tightest): `+ -` < `* /` < unary `-` < `^`
//! (right-associative). Atoms: decimal literals, `x`, `i`, parenthesised
//! expressions, and calls `exp sin cos sqrt abs re im`.

use num_complex::Complex64;

use crate::error::{Error, Result};

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

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                out.push((i, Tok::Star));
                i += 1;
            }
            '/' => {
                out.push((i, Tok::Slash));
                i += 1;
            }
            '^' => {
                out.push((i, Tok::Caret));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent suffix: 1e-3, 2.5E+10
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    pos: start,
                    msg: format!("bad number literal '{text}'"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                return Err(Error::Parse {
                    pos: i,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    Ok(out)
}

/// Parsed expression tree; evaluation is allocation-free.
#[derive(Debug, Clone)]
pub enum Expr {
    Const(Complex64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Re,
    Im,
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    src_len: usize,
}

// binding powers; caret binds tighter than unary minus, which binds
// tighter than * /
const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<(usize, Tok)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn err_here(&self, msg: &str) -> Error {
        let pos = self
            .toks
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.src_len);
        Error::Parse {
            pos,
            msg: msg.to_string(),
        }
    }

    fn parse_bp(&mut self, min_bp: u8) -> Result<Expr> {
        let (pos, tok) = self
            .next()
            .ok_or_else(|| self.err_here("unexpected end of expression"))?;
        let mut lhs = match tok {
            Tok::Num(v) => Expr::Const(Complex64::new(v, 0.0)),
            Tok::Ident(name) => match name.as_str() {
                "x" => Expr::Var,
                "i" => Expr::Const(Complex64::new(0.0, 1.0)),
                "pi" => Expr::Const(Complex64::new(std::f64::consts::PI, 0.0)),
                _ => {
                    let func = match name.as_str() {
                        "exp" => Func::Exp,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        "re" => Func::Re,
                        "im" => Func::Im,
                        _ => {
                            return Err(Error::Parse {
                                pos,
                                msg: format!("unknown identifier '{name}'"),
                            })
                        }
                    };
                    match self.next() {
                        Some((_, Tok::LParen)) => {}
                        _ => {
                            return Err(Error::Parse {
                                pos,
                                msg: format!("'{name}' requires a parenthesised argument"),
                            })
                        }
                    }
                    let arg = self.parse_bp(0)?;
                    match self.next() {
                        Some((_, Tok::RParen)) => {}
                        _ => return Err(self.err_here("expected ')'")),
                    }
                    Expr::Call(func, Box::new(arg))
                }
            },
            Tok::Minus => {
                let rhs = self.parse_bp(BP_NEG)?;
                Expr::Neg(Box::new(rhs))
            }
            Tok::LParen => {
                let inner = self.parse_bp(0)?;
                match self.next() {
                    Some((_, Tok::RParen)) => {}
                    _ => return Err(self.err_here("expected ')'")),
                }
                inner
            }
            other => {
                return Err(Error::Parse {
                    pos,
                    msg: format!("unexpected token {other:?}"),
                })
            }
        };

        loop {
            let (lbp, rbp) = match self.peek() {
                Some(Tok::Plus) | Some(Tok::Minus) => (BP_ADD, BP_ADD + 1),
                Some(Tok::Star) | Some(Tok::Slash) => (BP_MUL, BP_MUL + 1),
                // right-associative: recurse at the same binding power
                Some(Tok::Caret) => (BP_POW, BP_POW),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            let (_, op) = self.next().unwrap();
            let rhs = self.parse_bp(rbp)?;
            lhs = match op {
                Tok::Plus => Expr::Add(Box::new(lhs), Box::new(rhs)),
                Tok::Minus => Expr::Sub(Box::new(lhs), Box::new(rhs)),
                Tok::Star => Expr::Mul(Box::new(lhs), Box::new(rhs)),
                Tok::Slash => Expr::Div(Box::new(lhs), Box::new(rhs)),
                Tok::Caret => Expr::Pow(Box::new(lhs), Box::new(rhs)),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = lex(src)?;
        if toks.is_empty() {
            return Err(Error::Parse {
                pos: 0,
                msg: "empty expression".into(),
            });
        }
        let mut p = Parser {
            toks: &toks,
            pos: 0,
            src_len: src.len(),
        };
        let e = p.parse_bp(0)?;
        if p.pos != toks.len() {
            return Err(p.err_here("trailing input after expression"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => Complex64::new(x, 0.0),
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                let ex = b.eval(x);
                // integer powers computed exactly; powc would lose the
                // branch for negative real bases
                if ex.im == 0.0 && ex.re.fract() == 0.0 && ex.re.abs() <= 64.0 {
                    let mut acc = Complex64::new(1.0, 0.0);
                    let n = ex.re as i64;
                    for _ in 0..n.unsigned_abs() {
                        acc *= base;
                    }
                    if n < 0 {
                        acc.finv()
                    } else {
                        acc
                    }
                } else {
                    base.powc(ex)
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(x);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    // principal branch even when a negated literal leaves
                    // a -0.0 imaginary part: sqrt(-1) = +i always
                    Func::Sqrt => {
                        let canon = if v.im == 0.0 {
                            Complex64::new(v.re, 0.0)
                        } else {
                            v
                        };
                        canon.sqrt()
                    }
                    Func::Abs => Complex64::new(v.norm(), 0.0),
                    Func::Re => Complex64::new(v.re, 0.0),
                    Func::Im => Complex64::new(v.im, 0.0),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64) -> Complex64 {
        Expr::parse(src).unwrap().eval(x)
    }

    #[test]
    fn literals_and_variable() {
        assert_eq!(ev("2", 0.0), Complex64::new(2.0, 0.0));
        assert_eq!(ev("x", 3.5), Complex64::new(3.5, 0.0));
        assert_eq!(ev("i", 0.0), Complex64::new(0.0, 1.0));
        assert_eq!(ev("1e-3", 0.0), Complex64::new(1e-3, 0.0));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1+2*3", 0.0).re, 7.0);
        assert_eq!(ev("2*3^2", 0.0).re, 18.0);
        // right-associative caret: 2^(3^2)
        assert_eq!(ev("2^3^2", 0.0).re, 512.0);
        // unary minus binds looser than caret: -(2^2)
        assert_eq!(ev("-2^2", 0.0).re, -4.0);
        assert_eq!(ev("(-2)^2", 0.0).re, 4.0);
        assert_eq!(ev("6/3/2", 0.0).re, 1.0);
        assert_eq!(ev("1-2-3", 0.0).re, -4.0);
    }

    #[test]
    fn complex_arithmetic() {
        let v = ev("i*x", 2.0);
        assert_eq!(v, Complex64::new(0.0, 2.0));
        let w = ev("i^2", 0.0);
        assert!((w.re + 1.0).abs() < 1e-15 && w.im.abs() < 1e-15);
    }

    #[test]
    fn functions() {
        assert!((ev("exp(0)", 0.0).re - 1.0).abs() < 1e-15);
        assert!((ev("sin(0)", 0.0).re).abs() < 1e-15);
        assert!((ev("sqrt(4)", 0.0).re - 2.0).abs() < 1e-15);
        assert!((ev("abs(i*3)", 0.0).re - 3.0).abs() < 1e-15);
        assert!((ev("re(i*x+2)", 1.0).re - 2.0).abs() < 1e-15);
        assert!((ev("im(i*x+2)", 1.0).re - 1.0).abs() < 1e-15);
        // principal branch: sqrt(-1) = i
        let s = ev("sqrt(-1)", 0.0);
        assert!((s - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_position() {
        match Expr::parse("1 + @") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("sin x").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("foo(1)").is_err());
    }

    #[test]
    fn whitespace_insensitive() {
        let a = ev(" i * x + 2 ", 0.7);
        let b = ev("i*x+2", 0.7);
        assert_eq!(a, b);
    }
}
