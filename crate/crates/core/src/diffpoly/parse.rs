//! Parser for the plain text form, e.g. `5/32 * Q'^2 * Q^(-5/2) - 1/8 * Q'' * Q^(-3/2)`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use super::{DiffExpr, MonomialKey, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Q,
    Prime,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v: BigInt = s[start..i].parse().expect("ascii digits");
                out.push((start, Tok::Int(v)));
                continue;
            }
            b'Q' => Tok::Q,
            b'\'' => Tok::Prime,
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            _ => {
                let ch = s[i..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    pos: i,
                    msg: format!("unexpected character {ch:?}"),
                });
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Result<BigInt, ParseError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = v.clone();
                self.idx += 1;
                Ok(v)
            }
            _ => self.err("expected integer"),
        }
    }

    fn small_int(&mut self) -> Result<i64, ParseError> {
        let pos = self.pos();
        self.int()?.to_i64().ok_or(ParseError {
            pos,
            msg: "integer too large".into(),
        })
    }

    fn signed_small_int(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let v = self.small_int()?;
        Ok(if neg { -v } else { v })
    }

    /// Exponent of `Q`, returned in halves.
    fn q_exponent(&mut self) -> Result<i64, ParseError> {
        if self.eat(&Tok::LParen) {
            let num = self.signed_small_int()?;
            let halves = if self.eat(&Tok::Slash) {
                let pos = self.pos();
                match self.small_int()? {
                    2 => num,
                    1 => 2 * num,
                    _ => {
                        return Err(ParseError {
                            pos,
                            msg: "powers of Q must be integers or halves".into(),
                        })
                    }
                }
            } else {
                2 * num
            };
            if !self.eat(&Tok::RParen) {
                return self.err("expected ')'");
            }
            Ok(halves)
        } else {
            Ok(2 * self.signed_small_int()?)
        }
    }

    fn factor(&mut self) -> Result<(Rational, MonomialKey), ParseError> {
        match self.peek() {
            Some(Tok::Int(_)) => {
                let n = self.int()?;
                let d = if self.eat(&Tok::Slash) {
                    let pos = self.pos();
                    let d = self.int()?;
                    if d.is_zero() {
                        return Err(ParseError {
                            pos,
                            msg: "zero denominator".into(),
                        });
                    }
                    d
                } else {
                    BigInt::one()
                };
                Ok((Rational::new(n, d), MonomialKey::default()))
            }
            Some(Tok::Q) => {
                self.idx += 1;
                let mut order: u32 = 0;
                while self.eat(&Tok::Prime) {
                    order += 1;
                }
                if order == 0 && self.eat(&Tok::LBracket) {
                    let pos = self.pos();
                    order = u32::try_from(self.small_int()?).map_err(|_| ParseError {
                        pos,
                        msg: "derivative order out of range".into(),
                    })?;
                    if !self.eat(&Tok::RBracket) {
                        return self.err("expected ']'");
                    }
                }
                if order == 0 {
                    let halves = if self.eat(&Tok::Caret) { self.q_exponent()? } else { 2 };
                    Ok((Rational::one(), MonomialKey::new(halves, [])))
                } else {
                    let e = if self.eat(&Tok::Caret) {
                        let pos = self.pos();
                        u32::try_from(self.small_int()?).map_err(|_| ParseError {
                            pos,
                            msg: "exponent out of range".into(),
                        })?
                    } else {
                        1
                    };
                    Ok((Rational::one(), MonomialKey::new(0, [(order, e)])))
                }
            }
            _ => self.err("expected number or Q factor"),
        }
    }

    fn term(&mut self) -> Result<DiffExpr, ParseError> {
        let (c, k) = self.factor()?;
        let mut acc = DiffExpr::monomial(c, k);
        while self.eat(&Tok::Star) {
            let (c, k) = self.factor()?;
            acc = &acc * &DiffExpr::monomial(c, k);
        }
        Ok(acc)
    }

    fn expr(&mut self) -> Result<DiffExpr, ParseError> {
        let mut neg = self.eat(&Tok::Minus);
        if !neg {
            self.eat(&Tok::Plus);
        }
        let mut acc = DiffExpr::zero();
        loop {
            let t = self.term()?;
            acc = if neg { &acc - &t } else { &acc + &t };
            neg = match self.peek() {
                Some(Tok::Plus) => false,
                Some(Tok::Minus) => true,
                None => return Ok(acc),
                Some(_) => return self.err("expected '+', '-', '*' or end of input"),
            };
            self.idx += 1;
        }
    }
}

pub(super) fn parse_plain(s: &str) -> Result<DiffExpr, ParseError> {
    let toks = tokenize(s)?;
    if toks.is_empty() {
        return Err(ParseError {
            pos: 0,
            msg: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks,
        idx: 0,
        end: s.len(),
    };
    p.expr()
}

#[cfg(test)]
mod tests {
    use super::super::{rat, DiffExpr, MonomialKey};

    #[test]
    fn parses_rendered_forms() {
        let t1 = DiffExpr::parse_plain("-1/4 * Q' * Q^-1").unwrap();
        assert_eq!(t1, DiffExpr::monomial(rat(-1, 4), MonomialKey::new(-2, [(1, 1)])));
        let e = DiffExpr::parse_plain("5/32 * Q'^2 * Q^(-5/2) - 1/8*Q''*Q^(-3/2)").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(DiffExpr::parse_plain("Q[4]^2").unwrap(), DiffExpr::q_deriv(4).pow(2));
        assert_eq!(DiffExpr::parse_plain("0").unwrap(), DiffExpr::zero());
        assert_eq!(DiffExpr::parse_plain("Q * Q^(-1/2)").unwrap(), DiffExpr::q_power(1));
    }

    #[test]
    fn rejects_garbage() {
        let err = DiffExpr::parse_plain("Q + x").unwrap_err();
        assert_eq!(err.pos, 4);
        assert!(DiffExpr::parse_plain("Q^(1/3)").is_err());
        assert!(DiffExpr::parse_plain("1/0").is_err());
        assert!(DiffExpr::parse_plain("").is_err());
        assert!(DiffExpr::parse_plain("Q Q").is_err());
    }
}
