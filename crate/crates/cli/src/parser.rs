//! Recursive-descent parser for the expression grammar shared with the
//! library printer:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := atom ('^' INT)?
//! atom   := REAL | 'z' | 'conj' '(' expr ')' | 'e' INT | '(' expr ')' | tuple
//! tuple  := '(' REAL (',' REAL)* ')'
//! ```
//!
//! `*` is left-associative, so unparenthesized words carry the left
//! bracketing used by the left integration algorithm; `^` binds tighter than
//! `*`. Parenthesization is preserved as multiplication-tree shape and
//! printing a parsed phrase parses back to the identical tree.

use std::fmt;

use octode_core::algebra::{CdNum, MAX_LEVEL};
use octode_core::phrase::{Phrase, Tree};

#[derive(Debug, Clone)]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at byte {}: {}", self.position, self.message)
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Z,
    Conj,
    Basis(usize),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Comma,
    Int(u32),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>, SyntaxError> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let c = self.src[self.pos] as char;
            let start = self.pos;
            match c {
                ' ' | '\t' | '\n' | '\r' => {
                    self.pos += 1;
                    continue;
                }
                '+' => {
                    out.push((start, Tok::Plus));
                    self.pos += 1;
                }
                '-' => {
                    out.push((start, Tok::Minus));
                    self.pos += 1;
                }
                '*' => {
                    out.push((start, Tok::Star));
                    self.pos += 1;
                }
                '^' => {
                    out.push((start, Tok::Caret));
                    self.pos += 1;
                }
                '(' => {
                    out.push((start, Tok::LParen));
                    self.pos += 1;
                }
                ')' => {
                    out.push((start, Tok::RParen));
                    self.pos += 1;
                }
                ',' => {
                    out.push((start, Tok::Comma));
                    self.pos += 1;
                }
                '0'..='9' | '.' => {
                    let tok = self.number()?;
                    out.push((start, tok));
                }
                'z' => {
                    out.push((start, Tok::Z));
                    self.pos += 1;
                }
                'c' => {
                    if self.src[self.pos..].starts_with(b"conj") {
                        self.pos += 4;
                        out.push((start, Tok::Conj));
                    } else {
                        return self.err("unknown symbol, expected `conj`");
                    }
                }
                'e' => {
                    self.pos += 1;
                    let d0 = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    if d0 == self.pos {
                        return self.err("basis symbol needs an index, e.g. `e1`");
                    }
                    let idx: usize = std::str::from_utf8(&self.src[d0..self.pos])
                        .unwrap()
                        .parse()
                        .map_err(|_| SyntaxError {
                            position: d0,
                            message: "basis index out of range".into(),
                        })?;
                    out.push((start, Tok::Basis(idx)));
                }
                _ => return self.err(format!("unexpected character `{c}`")),
            }
        }
        Ok(out)
    }

    /// Standard float syntax; an exponent part binds only when `e` directly
    /// follows the digits, so `2*e1` stays a product with a basis element.
    fn number(&mut self) -> Result<Tok, SyntaxError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_len = self.pos - start;
        let mut is_float = false;
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            is_float = true;
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < self.src.len() && (self.src[look] == b'+' || self.src[look] == b'-') {
                look += 1;
            }
            if look < self.src.len() && self.src[look].is_ascii_digit() {
                is_float = true;
                self.pos = look;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: f64 = text.parse().map_err(|_| SyntaxError {
            position: start,
            message: format!("bad numeric literal `{text}`"),
        })?;
        if !is_float && int_len > 0 && int_len <= 9 {
            // keep integer identity available for `^ INT`
            Ok(Tok::Int(text.parse().unwrap()))
        } else {
            Ok(Tok::Num(v))
        }
    }
}

pub struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    level: u8,
    src_len: usize,
}

impl Parser {
    pub fn new(src: &str, level: u8) -> Result<Parser, SyntaxError> {
        let toks = Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
        .tokens()?;
        Ok(Parser {
            toks,
            at: 0,
            level,
            src_len: src.len(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks
            .get(self.at)
            .map(|(p, _)| *p)
            .unwrap_or(self.src_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(want) {
            self.at += 1;
            Ok(())
        } else {
            Err(SyntaxError {
                position: self.pos(),
                message: format!("expected {what}"),
            })
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError {
            position: self.pos(),
            message: message.into(),
        })
    }

    pub fn parse_expr(&mut self) -> Result<Phrase, SyntaxError> {
        let mut acc = self.parse_term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    acc = &acc + &self.parse_term()?;
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    acc = &acc - &self.parse_term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Phrase, SyntaxError> {
        let mut acc = self.parse_factor()?;
        while self.peek() == Some(&Tok::Star) {
            self.at += 1;
            acc = &acc * &self.parse_factor()?;
        }
        Ok(acc)
    }

    fn parse_factor(&mut self) -> Result<Phrase, SyntaxError> {
        let atom = self.parse_atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.at += 1;
            let n = match self.bump() {
                Some(Tok::Int(n)) => n,
                _ => return self.err("exponent must be a nonnegative integer"),
            };
            Ok(atom.pow(n))
        } else {
            Ok(atom)
        }
    }

    fn parse_atom(&mut self) -> Result<Phrase, SyntaxError> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Phrase::real(0, v)),
            Some(Tok::Int(v)) => Ok(Phrase::real(0, v as f64)),
            Some(Tok::Minus) => match self.bump() {
                Some(Tok::Num(v)) => Ok(Phrase::real(0, -v)),
                Some(Tok::Int(v)) => Ok(Phrase::real(0, -(v as f64))),
                _ => self.err("`-` at atom position must prefix a number"),
            },
            Some(Tok::Z) => Ok(Phrase::var()),
            Some(Tok::Conj) => {
                self.expect(&Tok::LParen, "`(` after conj")?;
                let inner = self.parse_expr()?;
                self.expect(&Tok::RParen, "closing `)`")?;
                Ok(inner.conj())
            }
            Some(Tok::Basis(idx)) => {
                let needed = needed_level(idx);
                if needed > MAX_LEVEL || needed > self.level {
                    return self.err(format!(
                        "basis index e{idx} outside level {} (max index {})",
                        self.level,
                        (1usize << self.level) - 1
                    ));
                }
                Ok(Phrase::constant(CdNum::basis(self.level, idx)))
            }
            Some(Tok::LParen) => {
                // tuple or parenthesized expression: a tuple is REALs joined
                // by commas
                let save = self.at;
                if let Ok(tuple) = self.try_tuple() {
                    return Ok(tuple);
                }
                self.at = save;
                let inner = self.parse_expr()?;
                self.expect(&Tok::RParen, "closing `)`")?;
                Ok(inner)
            }
            _ => self.err("expected a number, `z`, `conj(...)`, `e<k>`, or `(`"),
        }
    }

    fn parse_signed_real(&mut self) -> Result<f64, SyntaxError> {
        let neg = if self.peek() == Some(&Tok::Minus) {
            self.at += 1;
            true
        } else {
            false
        };
        let v = match self.bump() {
            Some(Tok::Num(v)) => v,
            Some(Tok::Int(v)) => v as f64,
            _ => return self.err("expected a real literal"),
        };
        Ok(if neg { -v } else { v })
    }

    fn try_tuple(&mut self) -> Result<Phrase, SyntaxError> {
        let first = self.parse_signed_real()?;
        if self.peek() != Some(&Tok::Comma) {
            return self.err("not a tuple");
        }
        let mut vals = vec![first];
        while self.peek() == Some(&Tok::Comma) {
            self.at += 1;
            vals.push(self.parse_signed_real()?);
        }
        self.expect(&Tok::RParen, "closing `)` of tuple")?;
        let level = match vals.len() {
            1 => 0u8,
            2 => 1,
            4 => 2,
            8 => 3,
            16 => 4,
            n => {
                return self.err(format!(
                    "tuple length {n} is not a power of two up to 16"
                ))
            }
        };
        if level > self.level {
            return self.err(format!(
                "tuple of length {} exceeds algebra level {}",
                vals.len(),
                self.level
            ));
        }
        Ok(Phrase::constant(CdNum::from_coeffs(level, vals).map_err(
            |e| SyntaxError {
                position: self.pos(),
                message: e.to_string(),
            },
        )?))
    }

    fn finished(&self) -> bool {
        self.at == self.toks.len()
    }
}

fn needed_level(idx: usize) -> u8 {
    let mut level = 0u8;
    while (1usize << level) <= idx {
        level += 1;
    }
    level
}

/// Parse a full expression; trailing input is an error.
pub fn parse_expression(src: &str, level: u8) -> Result<Phrase, SyntaxError> {
    let mut p = Parser::new(src, level)?;
    let phrase = p.parse_expr()?;
    if !p.finished() {
        return Err(SyntaxError {
            position: p.pos(),
            message: "trailing input after expression".into(),
        });
    }
    Ok(phrase)
}

/// Parse a constant point: an expression with no `z`.
pub fn parse_point(src: &str, level: u8) -> Result<CdNum, SyntaxError> {
    let phrase = parse_expression(src, level)?;
    fn has_var(t: &Tree) -> bool {
        match t {
            Tree::Var | Tree::ConjVar => true,
            Tree::Mul(l, r) => has_var(l) || has_var(r),
            _ => false,
        }
    }
    if phrase.terms().iter().any(has_var) {
        return Err(SyntaxError {
            position: 0,
            message: "expected a constant point, found `z`".into(),
        });
    }
    Ok(phrase.eval(&CdNum::zero(level)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use octode_core::phrase::Wrt;

    #[test]
    fn grammar_examples() {
        // z^2 + e1*z*e2: two monomials, the second left-bracketed
        let p = parse_expression("z^2 + e1*z*e2", 3).unwrap();
        assert_eq!(p.terms().len(), 2);
        let want = {
            let e1 = Phrase::constant(CdNum::basis(3, 1));
            let e2 = Phrase::constant(CdNum::basis(3, 2));
            &Phrase::var_pow(2) + &(&(&e1 * &Phrase::var()) * &e2)
        };
        assert_eq!(p, want);

        let p = parse_expression("conj(z)*z", 2).unwrap();
        assert_eq!(p, &Phrase::conj_var() * &Phrase::var());
    }

    #[test]
    fn bracketing_is_observable() {
        // (e1*(z*e2)) and e1*z*e2 differ as trees and as octonion values
        let left = parse_expression("e1*z*e2", 3).unwrap();
        let right = parse_expression("(e1*(z*e2))", 3).unwrap();
        assert_ne!(left, right);
        let z = CdNum::basis(3, 4);
        let a = left.eval(&z);
        let b = right.eval(&z);
        assert!((&a - &b).norm() > 1.0);
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "z^2 + e1*z*e2",
            "conj(z)*z",
            "(e1*(z*e2))",
            "e1*z*(e1*z)",
            "2.5*z^3 - e7*z",
            "(1,0,-2,3.5)*z",
            "z*-2",
        ] {
            let p = parse_expression(src, 3).unwrap();
            let printed = p.to_string();
            let again = parse_expression(&printed, 3).unwrap();
            assert_eq!(p, again, "{src} -> {printed}");
        }
    }

    #[test]
    fn exponent_binds_tighter_than_star() {
        let a = parse_expression("e1*z^2", 3).unwrap();
        let b = parse_expression("e1*(z^2)", 3).unwrap();
        assert_eq!(a, b);
        // derivative distinguishes z^2 from z*z only in tree identity, not
        // value; check the evaluation is the square
        let z = CdNum::basis(3, 1).scale(2.0);
        let v = a.eval(&z);
        let want = &CdNum::basis(3, 1) * &(&z * &z);
        assert!(v.approx_eq(&want, 1e-12));
        let d = a.diff(Wrt::Z);
        assert!(!d.is_zero());
    }

    #[test]
    fn print_parse_is_identity_on_random_trees() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        fn random_tree(rng: &mut ChaCha8Rng, depth: u32) -> Tree {
            if depth == 0 || rng.gen_bool(0.35) {
                match rng.gen_range(0..4) {
                    0 => Tree::Var,
                    1 => Tree::ConjVar,
                    2 => Tree::Const(CdNum::real(0, (rng.gen_range(-40..40) as f64) / 8.0)),
                    _ => {
                        let coeffs = (0..8).map(|_| (rng.gen_range(-20..20) as f64) / 4.0).collect();
                        Tree::Const(CdNum::from_coeffs(3, coeffs).unwrap())
                    }
                }
            } else {
                Tree::Mul(
                    Box::new(random_tree(rng, depth - 1)),
                    Box::new(random_tree(rng, depth - 1)),
                )
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..300 {
            let n = rng.gen_range(1..=3usize);
            let p = Phrase::from_terms((0..n).map(|_| random_tree(&mut rng, 3)).collect());
            let printed = p.to_string();
            let again = parse_expression(&printed, 3)
                .unwrap_or_else(|e| panic!("reparse failed for `{printed}`: {e}"));
            assert_eq!(p, again, "round trip broke on `{printed}`");
        }
    }

    #[test]
    fn points_and_errors() {
        assert!(parse_point("1 + e1", 2).unwrap().approx_eq(
            &(&CdNum::one(2) + &CdNum::basis(2, 1)),
            0.0
        ));
        assert!(parse_point("(0,1,0,0)", 2)
            .unwrap()
            .approx_eq(&CdNum::basis(2, 1), 0.0));
        assert!(parse_point("-1.5", 2).unwrap().approx_eq(&CdNum::real(2, -1.5), 0.0));
        assert!(parse_point("z", 2).is_err());
        assert!(parse_expression("e9", 3).is_err());
        assert!(parse_expression("q + 1", 3).is_err());
        assert!(parse_expression("z +", 3).is_err());
        assert!(parse_expression("(1,2,3)", 3).is_err());
        // number-with-exponent lexing vs basis products
        let p = parse_point("2e1", 1).unwrap();
        assert!(p.approx_eq(&CdNum::real(1, 20.0), 0.0));
        let q = parse_point("2*e1", 1).unwrap();
        assert!(q.approx_eq(&CdNum::basis(1, 1).scale(2.0), 0.0));
    }
}
