//! Recursive-descent parser for the field DSL.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' int)?
//! int     := ['-'] digits | '(' ['-'] digits ')' | $param
//! atom    := number | x | y | u | v | absz2 | absw2 | $param
//!          | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`.

use std::collections::BTreeMap;
use std::fmt;

use super::field::ScalarField;
use super::node::{Constant, Expr, Func, Rational, Var};

/// Named parameter values bound at parse time.
pub type Params = BTreeMap<String, f64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Zero-based character offset into the source.
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.pos + 1, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Constant),
    Ident(String),
    Param(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn err<T>(pos: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        pos,
        message: message.into(),
    })
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' | '\u{2212}' => Tok::Minus,
            '*' | '\u{00b7}' | '\u{00d7}' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '$' => {
                i += 1;
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                if s == i {
                    return err(start, "expected parameter name after '$'");
                }
                out.push((Tok::Param(chars[s..i].iter().collect()), start));
                continue;
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                out.push((Tok::Num(number(&text, start)?), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), start));
                continue;
            }
            other => return err(start, format!("unexpected character '{other}'")),
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

/// Decimal literal as an exact rational when it fits, else a double.
fn number(text: &str, pos: usize) -> Result<Constant, ParseError> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(k) => (&text[..k], text[k + 1..].parse::<i32>().ok()),
        None => (text, Some(0)),
    };
    if mantissa.matches('.').count() > 1 || mantissa == "." {
        return err(pos, format!("malformed number '{text}'"));
    }
    let float: f64 = match text.parse() {
        Ok(v) => v,
        Err(_) => return err(pos, format!("malformed number '{text}'")),
    };
    let exact = (|| {
        let mut exp = exponent?;
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        let digits = format!("{int_part}{frac_part}");
        let mut num: i128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        exp -= frac_part.len() as i32;
        let mut den: i128 = 1;
        while exp > 0 {
            num = num.checked_mul(10)?;
            exp -= 1;
        }
        while exp < 0 {
            den = den.checked_mul(10)?;
            exp += 1;
        }
        Some(Rational::new(num, den))
    })();
    Ok(match exact {
        Some(q) => Constant::Rational(q),
        None => Constant::Real(float),
    })
}

fn param_constant(v: f64) -> Constant {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        Constant::from(v as i64)
    } else {
        Constant::Real(v)
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    params: &'a Params,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            err(self.pos(), format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc.mul(&self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    let pos = self.pos();
                    let d = self.unary()?;
                    if d.is_zero() {
                        return err(pos, "division by constant zero");
                    }
                    acc = acc.div(&d);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(self.unary()?.neg());
        }
        if *self.peek() == Tok::Plus {
            self.bump();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        let n = self.exponent()?;
        if base.is_zero() && n < 0 {
            return err(pos, "negative power of constant zero");
        }
        if *self.peek() == Tok::Caret {
            return err(self.pos(), "chained '^' is ambiguous; add parentheses");
        }
        Ok(base.powi(n))
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let pos = self.pos();
        let paren = *self.peek() == Tok::LParen;
        if paren {
            self.bump();
        }
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        let value = match self.bump() {
            Tok::Num(c) => c.as_integer(),
            Tok::Param(name) => match self.params.get(&name) {
                Some(v) if v.fract() == 0.0 => Some(*v as i128),
                Some(_) => None,
                None => return err(pos, format!("unbound parameter ${name}")),
            },
            _ => None,
        };
        let Some(mut n) = value.and_then(|n| i32::try_from(n).ok()) else {
            return err(pos, "exponent must be an integer");
        };
        if negative {
            n = -n;
        }
        if paren {
            self.expect(Tok::RParen, "')' after exponent")?;
        }
        Ok(n)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(c) => Ok(Expr::constant(c)),
            Tok::Param(name) => match self.params.get(&name) {
                Some(v) if v.is_finite() => Ok(Expr::constant(param_constant(*v))),
                Some(_) => err(pos, format!("parameter ${name} is not finite")),
                None => err(pos, format!("unbound parameter ${name}")),
            },
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let var = |v| Expr::var(v);
                match name.as_str() {
                    "x" => Ok(var(Var::X)),
                    "y" => Ok(var(Var::Y)),
                    "u" => Ok(var(Var::U)),
                    "v" => Ok(var(Var::V)),
                    "absz2" => Ok(var(Var::X).powi(2).add(&var(Var::Y).powi(2))),
                    "absw2" => Ok(var(Var::U).powi(2).add(&var(Var::V).powi(2))),
                    other => match Func::from_name(other) {
                        Some(f) => {
                            self.expect(Tok::LParen, &format!("'(' after {other}"))?;
                            let a = self.expr()?;
                            self.expect(Tok::RParen, "')'")?;
                            Ok(Expr::func(f, &a))
                        }
                        None => err(pos, format!("unknown identifier '{other}'")),
                    },
                }
            }
            Tok::End => err(pos, "unexpected end of input"),
            t => err(pos, format!("unexpected token {t:?}")),
        }
    }
}

/// Parses DSL text into an expression.
pub fn parse_expr(src: &str, params: &Params) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0, params };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return err(p.pos(), "unexpected trailing input");
    }
    Ok(e)
}

/// Parses DSL text into an unrestricted field.
pub fn parse_field(src: &str, params: &Params) -> Result<ScalarField, ParseError> {
    parse_expr(src, params).map(ScalarField::new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Tape;

    fn ev(src: &str, p: [f64; 4]) -> f64 {
        let e = parse_expr(src, &Params::new()).unwrap();
        Tape::of(&e).eval(&p).unwrap()[0]
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(ev("-x^2", [3.0, 0.0, 0.0, 0.0]), -9.0);
        assert_eq!(ev("2*x^-2", [2.0, 0.0, 0.0, 0.0]), 0.5);
        assert_eq!(ev("x^(-1) + 1/2", [4.0, 0.0, 0.0, 0.0]), 0.75);
        assert_eq!(ev("u − (1/2)*(x−v)^2", [1.0, 0.0, 2.0, 0.0]), 1.5);
        assert_eq!(ev("absz2 + absw2", [1.0, 2.0, 3.0, 4.0]), 30.0);
        assert_eq!(ev("1e-2 + 0.25", [0.0; 4]), 0.26);
    }

    #[test]
    fn exact_decimal_literals() {
        let e = parse_expr("0.1", &Params::new()).unwrap();
        match e.as_const().unwrap() {
            Constant::Rational(q) => assert_eq!(q, Rational::new(1, 10)),
            Constant::Real(_) => panic!("expected exact"),
        }
    }

    #[test]
    fn parameters() {
        let mut p = Params::new();
        p.insert("a".into(), 1.5);
        p.insert("k".into(), 3.0);
        let e = parse_expr("$a*x^$k", &p).unwrap();
        assert_eq!(Tape::of(&e).eval(&[2.0, 0.0, 0.0, 0.0]).unwrap()[0], 12.0);
        let e = parse_expr("$b + x", &p).unwrap_err();
        assert_eq!(e.pos, 0);
        assert!(e.message.contains("unbound"));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_expr("x + * y", &Params::new()).unwrap_err();
        assert_eq!(e.pos, 4);
        let e = parse_expr("x^1.5", &Params::new()).unwrap_err();
        assert_eq!(e.pos, 2);
        let e = parse_expr("foo(x)", &Params::new()).unwrap_err();
        assert!(e.message.contains("foo"));
        assert!(parse_expr("(x + y", &Params::new()).is_err());
        assert!(parse_expr("x y", &Params::new()).is_err());
    }

    #[test]
    fn display_round_trips() {
        let src = "u - (1/2)*(x-v)^2 - ln(cos(x)) + 3*y^-2*sqrt(absz2) + 1e-3*exp(-u)";
        let e = parse_expr(src, &Params::new()).unwrap();
        let again = parse_expr(&e.to_string(), &Params::new()).unwrap();
        assert_eq!(e, again);
    }
}
