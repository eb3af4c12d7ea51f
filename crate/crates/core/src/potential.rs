//! Real polynomial potentials `V(x) = sum a_k x^k` with exact coefficients.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffpoly::{rational_to_f64, Rational};
use crate::roots::{poly_roots, real_roots};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential must have degree >= 2, got {0}")]
    DegreeTooLow(usize),
    #[error("potential is not confining: degree {degree} with leading coefficient {leading}")]
    NotConfining { degree: usize, leading: String },
    #[error("parse error at column {pos}: unexpected {token:?} ({msg})")]
    Parse { pos: usize, token: String, msg: String },
}

/// Confining polynomial potential: even degree `d >= 2`, positive leading coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialRepr", into = "PotentialRepr")]
pub struct Potential {
    coeffs: Vec<Rational>,
    /// `deriv_tables[k]` holds the f64 coefficients of `V^(k)`.
    deriv_tables: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PotentialRepr {
    text: String,
    coefficients: Vec<String>,
}

impl TryFrom<PotentialRepr> for Potential {
    type Error = PotentialError;
    fn try_from(r: PotentialRepr) -> Result<Self, Self::Error> {
        let coeffs = r
            .coefficients
            .iter()
            .map(|c| {
                c.parse::<Rational>().map_err(|_| PotentialError::Parse {
                    pos: 0,
                    token: c.clone(),
                    msg: "bad rational coefficient".into(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Potential::new(coeffs)
    }
}

impl From<Potential> for PotentialRepr {
    fn from(p: Potential) -> Self {
        PotentialRepr {
            text: p.to_string(),
            coefficients: p.coeffs.iter().map(|c| c.to_string()).collect(),
        }
    }
}

fn derivative_exact(c: &[Rational]) -> Vec<Rational> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| a * Rational::from_integer(BigInt::from(k)))
        .collect()
}

impl Potential {
    /// `coeffs[k]` multiplies `x^k`. Trailing zeros are dropped.
    pub fn new(mut coeffs: Vec<Rational>) -> Result<Self, PotentialError> {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        let degree = coeffs.len().saturating_sub(1);
        if degree < 2 {
            return Err(PotentialError::DegreeTooLow(degree));
        }
        let leading = &coeffs[degree];
        if degree % 2 == 1 || !leading.is_positive() {
            return Err(PotentialError::NotConfining {
                degree,
                leading: leading.to_string(),
            });
        }
        let mut deriv_tables = Vec::with_capacity(degree + 1);
        let mut cur = coeffs.clone();
        while !cur.is_empty() {
            deriv_tables.push(cur.iter().map(rational_to_f64).collect());
            cur = derivative_exact(&cur);
        }
        Ok(Potential { coeffs, deriv_tables })
    }

    pub fn from_integers(coeffs: &[i64]) -> Result<Self, PotentialError> {
        Potential::new(coeffs.iter().map(|&c| Rational::from_integer(c.into())).collect())
    }

    /// Parses text such as `x^4`, `0.5*x^2 + 0.1*x^4` or `x^2 - 3/2 x^3 + x^6`.
    /// Decimal literals are read as exact fractions.
    pub fn parse(text: &str) -> Result<Self, PotentialError> {
        Potential::new(parse_polynomial(text)?)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Rational] {
        &self.coeffs
    }

    /// Exact coefficients of `V^(k)`.
    pub fn derivative_coefficients(&self, k: usize) -> Vec<Rational> {
        let mut cur = self.coeffs.clone();
        for _ in 0..k {
            cur = derivative_exact(&cur);
        }
        cur
    }

    /// f64 coefficients of `V^(k)` (empty when `k > degree`).
    pub fn derivative_table(&self, k: usize) -> &[f64] {
        self.deriv_tables.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.deriv_tables[0], x)
    }

    pub fn eval_deriv(&self, k: usize, x: f64) -> f64 {
        horner(self.derivative_table(k), x)
    }

    /// `[V(z), V'(z), ..., V^(upto)(z)]`, zero past the degree.
    pub fn eval_derivs_complex(&self, z: Complex64, upto: usize) -> Vec<Complex64> {
        (0..=upto)
            .map(|k| {
                self.derivative_table(k)
                    .iter()
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
            })
            .collect()
    }

    /// Global minimum `(x_min, V(x_min))` over the real line.
    pub fn minimum(&self) -> (f64, f64) {
        let crit = poly_roots(&self.deriv_tables[1]).map_or_else(Vec::new, |r| real_roots(&r, 1e-7));
        let mut best = (0.0, self.eval(0.0));
        for x in crit {
            let x = newton_real(self.derivative_table(1), self.derivative_table(2), x);
            let v = self.eval(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best
    }

    /// Whether `V(-x) = V(x)`.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(Zero::is_zero)
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let abs = c.abs();
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            first = false;
            let mono = match k {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{k}"),
            };
            match (abs.is_one(), mono.is_empty()) {
                (true, false) => write!(f, "{mono}")?,
                (_, true) => write!(f, "{abs}")?,
                (false, false) => write!(f, "{abs}*{mono}")?,
            }
        }
        Ok(())
    }
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn newton_real(p: &[f64], dp: &[f64], x: f64) -> f64 {
    let d = horner(dp, x);
    if d == 0.0 {
        return x;
    }
    let y = x - horner(p, x) / d;
    if horner(p, y).abs() <= horner(p, x).abs() {
        y
    } else {
        x
    }
}

fn parse_polynomial(text: &str) -> Result<Vec<Rational>, PotentialError> {
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut coeffs: Vec<Rational> = Vec::new();

    let skip_ws = |i: &mut usize| {
        while *i < bytes.len() && bytes[*i].is_ascii_whitespace() {
            *i += 1;
        }
    };
    let token_at = |i: usize| -> String {
        if i >= bytes.len() {
            return "end of input".to_string();
        }
        let rest = &text[i..];
        let len = rest
            .char_indices()
            .find(|&(j, ch)| j > 0 && !ch.is_alphanumeric())
            .map_or(rest.len(), |(j, _)| j);
        let first = rest.chars().next().unwrap();
        if first.is_alphanumeric() {
            rest[..len].to_string()
        } else {
            first.to_string()
        }
    };
    let err = |pos: usize, msg: &str| PotentialError::Parse {
        pos,
        token: token_at(pos),
        msg: msg.to_string(),
    };
    let read_uint = |i: &mut usize| -> Option<BigInt> {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        (start < *i).then(|| text[start..*i].parse().unwrap())
    };

    skip_ws(&mut i);
    if i >= bytes.len() {
        return Err(err(i, "empty potential"));
    }
    let mut first = true;
    loop {
        skip_ws(&mut i);
        let mut sign = Rational::one();
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            if bytes[i] == b'-' {
                sign = -sign;
            }
            i += 1;
            skip_ws(&mut i);
        } else if !first {
            return Err(err(i, "expected '+' or '-'"));
        }
        first = false;

        // coefficient: decimal with optional exponent, optionally "/ integer"
        let mut coeff: Option<Rational> = None;
        if i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            let start = i;
            let int_part = read_uint(&mut i).unwrap_or_default();
            let mut value = Rational::from_integer(int_part);
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                let fs = i;
                let frac = read_uint(&mut i).unwrap_or_default();
                let digits = i - fs;
                if digits == 0 && i - start == 1 {
                    return Err(err(start, "malformed number"));
                }
                value += Rational::new(frac, BigInt::from(10).pow(digits as u32));
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                i += 1;
                let neg = i < bytes.len() && bytes[i] == b'-';
                if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
                    i += 1;
                }
                let epos = i;
                let e = read_uint(&mut i).ok_or_else(|| err(epos, "malformed exponent"))?;
                let e: u32 = e.try_into().map_err(|_| err(epos, "exponent too large"))?;
                let p = Rational::from_integer(BigInt::from(10).pow(e));
                value = if neg { value / p } else { value * p };
            }
            skip_ws(&mut i);
            if i < bytes.len() && bytes[i] == b'/' {
                i += 1;
                skip_ws(&mut i);
                let dpos = i;
                let d = read_uint(&mut i).ok_or_else(|| err(dpos, "expected integer denominator"))?;
                if d.is_zero() {
                    return Err(err(dpos, "zero denominator"));
                }
                value /= Rational::from_integer(d);
            }
            coeff = Some(value);
            skip_ws(&mut i);
            if i < bytes.len() && bytes[i] == b'*' {
                i += 1;
                skip_ws(&mut i);
                if !(i < bytes.len() && bytes[i] == b'x') {
                    return Err(err(i, "expected 'x' after '*'"));
                }
            }
        }

        // monomial x or x^k
        let mut power = 0usize;
        if i < bytes.len() && bytes[i] == b'x' && !bytes.get(i + 1).is_some_and(u8::is_ascii_alphanumeric) {
            i += 1;
            power = 1;
            skip_ws(&mut i);
            if i < bytes.len() && bytes[i] == b'^' {
                i += 1;
                skip_ws(&mut i);
                let ppos = i;
                let p = read_uint(&mut i).ok_or_else(|| err(ppos, "expected non-negative integer power"))?;
                power = p.try_into().map_err(|_| err(ppos, "power too large"))?;
                if power > 64 {
                    return Err(err(ppos, "power too large"));
                }
            }
        } else if coeff.is_none() {
            return Err(err(i, "expected number or 'x'"));
        }

        let c = sign * coeff.unwrap_or_else(Rational::one);
        if coeffs.len() <= power {
            coeffs.resize(power + 1, Rational::zero());
        }
        coeffs[power] += c;

        skip_ws(&mut i);
        if i >= bytes.len() {
            break;
        }
    }
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffpoly::rat;

    #[test]
    fn parse_exact_decimals() {
        let v = Potential::parse("0.5*x^2 + 0.1*x^4").unwrap();
        assert_eq!(v.coefficients(), &[rat(0, 1), rat(0, 1), rat(1, 2), rat(0, 1), rat(1, 10)]);
        let v = Potential::parse("x^2").unwrap();
        assert_eq!(v.degree(), 2);
        let v = Potential::parse(" -3/2 x + x^4 + 2 + 1e-1 x^2").unwrap();
        assert_eq!(v.coefficients(), &[rat(2, 1), rat(-3, 2), rat(1, 10), rat(0, 1), rat(1, 1)]);
        assert_eq!(v.to_string(), "2 - 3/2*x + 1/10*x^2 + x^4");
    }

    #[test]
    fn parse_errors_name_token() {
        match Potential::parse("sin(x)") {
            Err(PotentialError::Parse { pos, token, .. }) => {
                assert_eq!(pos, 0);
                assert_eq!(token, "sin");
            }
            other => panic!("unexpected {other:?}"),
        }
        match Potential::parse("x^2 + y") {
            Err(PotentialError::Parse { pos, token, .. }) => {
                assert_eq!(pos, 6);
                assert_eq!(token, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Potential::parse("").is_err());
        assert!(Potential::parse("x^2 x").is_err());
        assert!(Potential::parse("1/0 x^2").is_err());
    }

    #[test]
    fn confinement() {
        assert!(matches!(Potential::parse("x"), Err(PotentialError::DegreeTooLow(1))));
        assert!(matches!(Potential::parse("x^3"), Err(PotentialError::NotConfining { .. })));
        assert!(matches!(Potential::parse("-x^2"), Err(PotentialError::NotConfining { .. })));
        assert!(Potential::parse("x^4 - x^2").is_ok());
    }

    #[test]
    fn derivatives() {
        let v = Potential::parse("x^2 + x^4").unwrap();
        assert_eq!(v.derivative_coefficients(2), vec![rat(2, 1), rat(0, 1), rat(12, 1)]);
        let d = v.eval_derivs_complex(Complex64::new(1.0, 1.0), 5);
        let z = Complex64::new(1.0, 1.0);
        assert!((d[0] - (z * z + z.powi(4))).norm() < 1e-14);
        assert!((d[1] - (2.0 * z + 4.0 * z.powi(3))).norm() < 1e-14);
        assert_eq!(d[4], Complex64::new(24.0, 0.0));
        assert_eq!(d[5], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn minimum_of_shifted_well() {
        let v = Potential::parse("x^2 - 2x + 3").unwrap();
        let (x, e) = v.minimum();
        assert!((x - 1.0).abs() < 1e-12 && (e - 2.0).abs() < 1e-12);
        let dw = Potential::parse("x^4 - 2x^2").unwrap();
        assert!((dw.minimum().1 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip() {
        let v = Potential::parse("0.5*x^2 + 0.1*x^4").unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<Potential>(&s).unwrap(), v);
    }
}
