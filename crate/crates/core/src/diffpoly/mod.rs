//! Exact algebra of differential polynomials in a single abstract function `Q(x)`.
//!
//! A [`DiffExpr`] is a finite sum of monomials
//!
//! ```text
//! c * Q^(p/2) * (Q')^e1 * (Q'')^e2 * ...
//! ```
//!
//! with exact rational `c`, an integer `p` counting half powers of `Q`, and
//! positive exponents on the derivatives. Expressions are kept canonical at
//! all times: like monomials are merged, zero coefficients are dropped and the
//! monomials are ordered by [`MonomialKey`]'s total order. Two expressions are
//! equal exactly when their monomial lists are identical.

mod json;
mod parse;
mod render;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub use parse::ParseError;

/// Exact coefficient type. Always normalized (`gcd = 1`, positive denominator).
pub type Rational = BigRational;

/// Relative tolerance used by [`eval_numeric`] when checking `sqrt_q^2 == Q`.
pub const DEFAULT_BRANCH_TOL: f64 = 1e-8;

/// Convenience constructor for small rationals.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exponent structure of a monomial: the half-power of `Q` and the exponents
/// of the derivatives `Q^(k)`, `k >= 1`.
///
/// Ordering: total derivative weight `sum k*e_k`, then the half-power of `Q`,
/// then the `(k, e_k)` list lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MonomialKey {
    q_half: i64,
    derivs: Vec<(u32, u32)>,
}

impl MonomialKey {
    pub fn new(q_half_exponent: i64, derivs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        for (k, e) in derivs {
            assert!(k >= 1, "derivative order must be >= 1 (use the Q half-power for Q itself)");
            if e > 0 {
                *map.entry(k).or_default() += e;
            }
        }
        MonomialKey {
            q_half: q_half_exponent,
            derivs: map.into_iter().collect(),
        }
    }

    /// Exponent of `Q` in units of one half.
    pub fn q_half_exponent(&self) -> i64 {
        self.q_half
    }

    /// `(k, e_k)` pairs sorted by derivative order `k`; every `e_k >= 1`.
    pub fn deriv_exponents(&self) -> &[(u32, u32)] {
        &self.derivs
    }

    /// `sum k * e_k`, the number of x-derivatives carried by the monomial.
    pub fn weight(&self) -> u64 {
        self.derivs.iter().map(|&(k, e)| k as u64 * e as u64).sum()
    }

    pub fn max_deriv_order(&self) -> u32 {
        self.derivs.last().map_or(0, |&(k, _)| k)
    }

    fn mul(&self, other: &MonomialKey) -> MonomialKey {
        let mut out = Vec::with_capacity(self.derivs.len() + other.derivs.len());
        let (mut i, mut j) = (0, 0);
        while i < self.derivs.len() && j < other.derivs.len() {
            let (ka, ea) = self.derivs[i];
            let (kb, eb) = other.derivs[j];
            match ka.cmp(&kb) {
                Ordering::Less => {
                    out.push((ka, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((kb, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((ka, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.derivs[i..]);
        out.extend_from_slice(&other.derivs[j..]);
        MonomialKey {
            q_half: self.q_half + other.q_half,
            derivs: out,
        }
    }

    /// Replaces one factor `Q^(k)` by `Q^(k+1)`.
    fn bump_derivative(&self, k: u32) -> MonomialKey {
        let mut derivs = self.derivs.clone();
        let pos = derivs.iter().position(|&(kk, _)| kk == k).expect("factor present");
        if derivs[pos].1 == 1 {
            derivs.remove(pos);
        } else {
            derivs[pos].1 -= 1;
        }
        match derivs.binary_search_by_key(&(k + 1), |&(kk, _)| kk) {
            Ok(p) => derivs[p].1 += 1,
            Err(p) => derivs.insert(p, (k + 1, 1)),
        }
        MonomialKey {
            q_half: self.q_half,
            derivs,
        }
    }
}

impl Ord for MonomialKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight()
            .cmp(&other.weight())
            .then(self.q_half.cmp(&other.q_half))
            .then_with(|| self.derivs.cmp(&other.derivs))
    }
}

impl PartialOrd for MonomialKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A single nonzero term `coeff * key`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: Rational,
    pub key: MonomialKey,
}

/// Canonical differential polynomial in `Q`, `Q'`, `Q''`, ... with half-integer
/// powers of `Q` allowed. The empty expression is zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct DiffExpr {
    terms: BTreeMap<MonomialKey, Rational>,
}

impl DiffExpr {
    pub fn zero() -> Self {
        DiffExpr::default()
    }

    pub fn one() -> Self {
        DiffExpr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        DiffExpr::monomial(c, MonomialKey::default())
    }

    pub fn monomial(coeff: Rational, key: MonomialKey) -> Self {
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(key, coeff);
        }
        DiffExpr { terms }
    }

    /// `Q^(half_exponent / 2)`.
    pub fn q_power(half_exponent: i64) -> Self {
        DiffExpr::monomial(Rational::one(), MonomialKey::new(half_exponent, []))
    }

    /// `Q^(k)`, the k-th derivative of `Q` (`k = 0` is `Q` itself).
    pub fn q_deriv(k: u32) -> Self {
        if k == 0 {
            DiffExpr::q_power(2)
        } else {
            DiffExpr::monomial(Rational::one(), MonomialKey::new(0, [(k, 1)]))
        }
    }

    /// Builds an expression from arbitrary (possibly repeated, possibly zero)
    /// terms, collecting them into canonical form.
    pub fn from_terms(terms: impl IntoIterator<Item = (Rational, MonomialKey)>) -> Self {
        let mut out = DiffExpr::zero();
        for (c, k) in terms {
            out.add_term(k, c);
        }
        out
    }

    fn add_term(&mut self, key: MonomialKey, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Monomials in canonical order.
    pub fn monomials(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().map(|(k, c)| Monomial {
            coeff: c.clone(),
            key: k.clone(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MonomialKey, &Rational)> {
        self.terms.iter()
    }

    /// Coefficient of the given monomial (zero if absent).
    pub fn coeff(&self, key: &MonomialKey) -> Rational {
        self.terms.get(key).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn scale(&self, c: &Rational) -> DiffExpr {
        if c.is_zero() {
            return DiffExpr::zero();
        }
        DiffExpr {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> DiffExpr {
        let mut acc = DiffExpr::one();
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// d/dx, by the product and chain rules on each monomial.
    pub fn differentiate(&self) -> DiffExpr {
        let mut out = DiffExpr::zero();
        for (key, c) in &self.terms {
            if key.q_half != 0 {
                // d/dx Q^(p/2) = (p/2) Q^((p-2)/2) Q'
                let k = key.mul(&MonomialKey::new(-2, [(1, 1)]));
                out.add_term(k, c * rat(key.q_half, 2));
            }
            for &(order, e) in &key.derivs {
                out.add_term(key.bump_derivative(order), c * Rational::from_integer(e.into()));
            }
        }
        out
    }

    /// Highest derivative order `k` appearing in any monomial (0 if none).
    pub fn max_deriv_order(&self) -> u32 {
        self.terms.keys().map(MonomialKey::max_deriv_order).max().unwrap_or(0)
    }

    /// True when every monomial carries an integer power of `Q`.
    pub fn has_only_integer_q_powers(&self) -> bool {
        self.terms.keys().all(|k| k.q_half % 2 == 0)
    }

    /// True when every monomial carries a half-odd power of `Q`.
    pub fn has_only_half_odd_q_powers(&self) -> bool {
        self.terms.keys().all(|k| k.q_half.rem_euclid(2) == 1)
    }

    /// Lowers the expression to floating point for repeated evaluation.
    pub fn compile(&self) -> NumericExpr {
        NumericExpr {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (rational_to_f64(c), k.q_half, k.derivs.clone()))
                .collect(),
            max_deriv: self.max_deriv_order(),
        }
    }

    pub fn to_plain(&self) -> String {
        render::plain(self)
    }

    pub fn to_latex(&self) -> String {
        render::latex(self)
    }

    /// Parses the plain rendering produced by [`DiffExpr::to_plain`].
    pub fn parse_plain(s: &str) -> Result<DiffExpr, ParseError> {
        parse::parse_plain(s)
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.numer()
        .to_f64()
        .zip(r.denom().to_f64())
        .filter(|(n, d)| n.is_finite() && d.is_finite())
        .map(|(n, d)| n / d)
        .unwrap_or_else(|| {
            // Huge numerator/denominator: scale both down before dividing.
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let n = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        })
}

impl fmt::Display for DiffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_plain())
    }
}

impl std::str::FromStr for DiffExpr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DiffExpr::parse_plain(s)
    }
}

impl Add for &DiffExpr {
    type Output = DiffExpr;
    fn add(self, rhs: &DiffExpr) -> DiffExpr {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.add_term(k.clone(), c.clone());
        }
        out
    }
}

impl Sub for &DiffExpr {
    type Output = DiffExpr;
    fn sub(self, rhs: &DiffExpr) -> DiffExpr {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            out.add_term(k.clone(), -c);
        }
        out
    }
}

impl Mul for &DiffExpr {
    type Output = DiffExpr;
    fn mul(self, rhs: &DiffExpr) -> DiffExpr {
        let mut out = DiffExpr::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                out.add_term(ka.mul(kb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &DiffExpr {
    type Output = DiffExpr;
    fn neg(self) -> DiffExpr {
        DiffExpr {
            terms: self.terms.iter().map(|(k, c)| (k.clone(), -c)).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for DiffExpr {
            type Output = DiffExpr;
            fn $m(self, rhs: DiffExpr) -> DiffExpr { (&self).$m(&rhs) }
        }
        impl $tr<&DiffExpr> for DiffExpr {
            type Output = DiffExpr;
            fn $m(self, rhs: &DiffExpr) -> DiffExpr { (&self).$m(rhs) }
        }
        impl $tr<DiffExpr> for &DiffExpr {
            type Output = DiffExpr;
            fn $m(self, rhs: DiffExpr) -> DiffExpr { self.$m(&rhs) }
        }
    )*};
}
forward_owned!(Add add, Sub sub, Mul mul);

impl Neg for DiffExpr {
    type Output = DiffExpr;
    fn neg(self) -> DiffExpr {
        -&self
    }
}

impl std::iter::Sum for DiffExpr {
    fn sum<I: Iterator<Item = DiffExpr>>(iter: I) -> DiffExpr {
        iter.fold(DiffExpr::zero(), |acc, x| acc + x)
    }
}

// Free-function forms of the ring operations.

pub fn q_power(half_exponent: i64) -> DiffExpr {
    DiffExpr::q_power(half_exponent)
}

pub fn add(a: &DiffExpr, b: &DiffExpr) -> DiffExpr {
    a + b
}

pub fn mul(a: &DiffExpr, b: &DiffExpr) -> DiffExpr {
    a * b
}

pub fn negate(a: &DiffExpr) -> DiffExpr {
    -a
}

pub fn differentiate(a: &DiffExpr) -> DiffExpr {
    a.differentiate()
}

pub fn equals(a: &DiffExpr, b: &DiffExpr) -> bool {
    a == b
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("expression needs Q^({needed}) but only {available} values (Q..Q^({})) were supplied", available.saturating_sub(1))]
    MissingDerivative { needed: u32, available: usize },
    #[error("branch value inconsistent with Q: |sqrt_q^2 - Q| = {defect:e} exceeds tolerance {tol:e}")]
    BranchInconsistent { defect: f64, tol: f64 },
}

/// Evaluates `a` at a point where `Q, Q', Q'', ...` take the values `q_derivs`,
/// using `sqrt_q` as the branch of `Q^(1/2)`. Integer powers of `Q` are taken
/// from `q_derivs[0]` directly, so they never depend on the branch.
pub fn eval_numeric(a: &DiffExpr, q_derivs: &[Complex64], sqrt_q: Complex64) -> Result<Complex64, EvalError> {
    a.compile().eval_with_tol(q_derivs, sqrt_q, DEFAULT_BRANCH_TOL)
}

/// Floating-point image of a [`DiffExpr`], for evaluation in inner loops.
#[derive(Clone, Debug)]
pub struct NumericExpr {
    terms: Vec<(f64, i64, Vec<(u32, u32)>)>,
    max_deriv: u32,
}

impl NumericExpr {
    /// Number of entries `q_derivs` must have.
    pub fn required_derivs(&self) -> usize {
        self.max_deriv as usize + 1
    }

    pub fn eval(&self, q_derivs: &[Complex64], sqrt_q: Complex64) -> Result<Complex64, EvalError> {
        self.eval_with_tol(q_derivs, sqrt_q, DEFAULT_BRANCH_TOL)
    }

    pub fn eval_with_tol(&self, q_derivs: &[Complex64], sqrt_q: Complex64, tol: f64) -> Result<Complex64, EvalError> {
        if q_derivs.len() < self.required_derivs() {
            return Err(EvalError::MissingDerivative {
                needed: self.max_deriv,
                available: q_derivs.len(),
            });
        }
        let q = q_derivs[0];
        let defect = (sqrt_q * sqrt_q - q).norm();
        if defect > tol * q.norm() {
            return Err(EvalError::BranchInconsistent { defect, tol });
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for (c, q_half, derivs) in &self.terms {
            let mut v = Complex64::new(*c, 0.0);
            let whole = q_half.div_euclid(2);
            if whole != 0 {
                v *= q.powi(whole as i32);
            }
            if q_half.rem_euclid(2) == 1 {
                v *= sqrt_q;
            }
            for &(k, e) in derivs {
                v *= q_derivs[k as usize].powi(e as i32);
            }
            sum += v;
        }
        Ok(sum)
    }
}

/// Sign-aware helper used by the renderers.
fn split_sign(c: &Rational) -> (bool, Rational) {
    (c.is_negative(), c.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qp() -> DiffExpr {
        DiffExpr::q_deriv(1)
    }

    #[test]
    fn q_power_constructors() {
        let half = q_power(1);
        assert_eq!(half.len(), 1);
        let m = half.monomials().next().unwrap();
        assert_eq!(m.coeff, Rational::one());
        assert_eq!(m.key.q_half_exponent(), 1);
        assert!(m.key.deriv_exponents().is_empty());
        assert_eq!(q_power(0), DiffExpr::one());
        assert_eq!(q_power(-3).monomials().next().unwrap().key.q_half_exponent(), -3);
    }

    #[test]
    fn add_examples() {
        let a = &qp() * &q_power(-2);
        assert!(add(&a, &negate(&a)).is_zero());

        let q2 = DiffExpr::q_deriv(2);
        let s = add(&q2.scale(&rat(1, 2)), &q2.scale(&rat(1, 3)));
        assert_eq!(s, q2.scale(&rat(5, 6)));

        let two = add(&q_power(1), &qp());
        assert_eq!(two.len(), 2);
        // weight 0 sorts before weight 1
        let keys: Vec<_> = two.monomials().map(|m| m.key.weight()).collect();
        assert_eq!(keys, vec![0, 1]);
    }

    #[test]
    fn mul_examples() {
        let t0 = -q_power(1);
        assert_eq!(mul(&t0, &t0), DiffExpr::q_deriv(0));
        let a = &qp() * &q_power(-2);
        let sq = mul(&a, &a);
        assert_eq!(sq, DiffExpr::monomial(Rational::one(), MonomialKey::new(-4, [(1, 2)])));
        assert!(mul(&a, &DiffExpr::zero()).is_zero());
    }

    #[test]
    fn differentiate_examples() {
        assert_eq!(
            differentiate(&q_power(1)),
            DiffExpr::monomial(rat(1, 2), MonomialKey::new(-1, [(1, 1)]))
        );
        let a = (&qp() * &q_power(-2)).scale(&rat(1, 4));
        let expected = DiffExpr::from_terms([
            (rat(1, 4), MonomialKey::new(-2, [(2, 1)])),
            (rat(-1, 4), MonomialKey::new(-4, [(1, 2)])),
        ]);
        assert_eq!(differentiate(&a), expected);
        assert!(differentiate(&DiffExpr::one()).is_zero());
    }

    #[test]
    fn equals_merges_at_construction() {
        assert!(equals(&q_power(1), &(&q_power(-1) * &DiffExpr::q_deriv(0))));
        let a = &q_power(3) + &DiffExpr::q_deriv(4);
        assert!(equals(&(&a - &a), &DiffExpr::zero()));
    }

    #[test]
    fn eval_examples() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let q = DiffExpr::q_deriv(0);
        assert_eq!(eval_numeric(&q, &[c(4.0)], c(-2.0)).unwrap(), c(4.0));
        assert_eq!(eval_numeric(&-q_power(1), &[c(4.0)], c(2.0)).unwrap(), c(-2.0));
        let t1 = (&qp() * &q_power(-2)).scale(&rat(-1, 4));
        let v = eval_numeric(&t1, &[c(2.0), c(6.0)], c(2f64.sqrt())).unwrap();
        // independent scalar arithmetic: -6 / (4 * 2)
        assert!((v - c(-6.0 / (4.0 * 2.0))).norm() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let e = DiffExpr::q_deriv(3);
        assert!(matches!(
            eval_numeric(&e, &[c(1.0), c(1.0)], c(1.0)),
            Err(EvalError::MissingDerivative { needed: 3, available: 2 })
        ));
        assert!(matches!(
            eval_numeric(&q_power(1), &[c(4.0)], c(3.0)),
            Err(EvalError::BranchInconsistent { .. })
        ));
    }

    #[test]
    fn rational_to_f64_handles_huge_values() {
        let big = Rational::new(BigInt::from(3) << 2000u32, BigInt::from(1) << 2000u32);
        assert_eq!(rational_to_f64(&big), 3.0);
    }

    // --- property tests -------------------------------------------------

    fn arb_key() -> impl Strategy<Value = MonomialKey> {
        (-6i64..6, prop::collection::vec((1u32..4, 1u32..3), 0..3)).prop_map(|(q, d)| MonomialKey::new(q, d))
    }

    fn arb_expr() -> impl Strategy<Value = DiffExpr> {
        prop::collection::vec(((-9i64..10, 1i64..7), arb_key()), 0..5)
            .prop_map(|ts| DiffExpr::from_terms(ts.into_iter().map(|((n, d), k)| (rat(n, d), k))))
    }

    /// Q(x) = x^3 - 2x + 5 and its derivatives, as a fixed numeric path.
    fn q_path(x: Complex64) -> Vec<Complex64> {
        vec![
            x * x * x - 2.0 * x + 5.0,
            3.0 * x * x - 2.0,
            6.0 * x,
            Complex64::new(6.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]
    }

    proptest! {
        #[test]
        fn canonical_idempotent(e in arb_expr()) {
            let again = DiffExpr::from_terms(e.monomials().map(|m| (m.coeff, m.key)));
            prop_assert_eq!(&again, &e);
            let keys: Vec<_> = e.iter().map(|(k, _)| k.clone()).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            prop_assert_eq!(keys, sorted);
            prop_assert!(e.iter().all(|(_, c)| !c.is_zero()));
        }

        #[test]
        fn ring_axioms(a in arb_expr(), b in arb_expr(), c in arb_expr()) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        }

        #[test]
        fn leibniz(a in arb_expr(), b in arb_expr()) {
            let lhs = differentiate(&(&a * &b));
            let rhs = &(&differentiate(&a) * &b) + &(&a * &differentiate(&b));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn plain_round_trip(a in arb_expr()) {
            let text = a.to_plain();
            let back = DiffExpr::parse_plain(&text).unwrap();
            prop_assert_eq!(back, a);
        }

        #[test]
        fn eval_homomorphic(a in arb_expr(), b in arb_expr(), re in 0.5f64..2.0, im in -1.0f64..1.0) {
            let qd = q_path(Complex64::new(re, im));
            let s = qd[0].sqrt();
            let ea = eval_numeric(&a, &qd, s).unwrap();
            let eb = eval_numeric(&b, &qd, s).unwrap();
            let sum = eval_numeric(&(&a + &b), &qd, s).unwrap();
            let prod = eval_numeric(&(&a * &b), &qd, s).unwrap();
            let scale = 1.0 + ea.norm() + eb.norm();
            prop_assert!((sum - (ea + eb)).norm() <= 1e-12 * scale);
            prop_assert!((prod - ea * eb).norm() <= 1e-12 * (1.0 + ea.norm() * eb.norm()));
        }

        #[test]
        fn derivative_matches_finite_difference(a in arb_expr(), x0 in 0.5f64..2.0) {
            // real path where Q > 0, so the principal root is continuous
            let x = Complex64::new(x0, 0.0);
            let h = 1e-3;
            let f = |z: Complex64| {
                let qd = q_path(z);
                eval_numeric(&a, &qd, qd[0].sqrt()).unwrap()
            };
            let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
            let fd = (4.0 * d(0.5 * h) - d(h)) / 3.0;
            let qd = q_path(x);
            let exact = eval_numeric(&differentiate(&a), &qd, qd[0].sqrt()).unwrap();
            let scale = exact.norm().max(f(x).norm()).max(1.0);
            prop_assert!((fd - exact).norm() <= 1e-6 * scale, "fd {fd} exact {exact}");
        }
    }
}
