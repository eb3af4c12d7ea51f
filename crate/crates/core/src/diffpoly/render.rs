use num_traits::One;

use super::{split_sign, DiffExpr, MonomialKey, Rational};

/// Name of `Q^(k)` in plain mode: primes up to third order, `Q[k]` above.
pub(super) fn plain_deriv_name(k: u32) -> String {
    if k <= 3 {
        format!("Q{}", "'".repeat(k as usize))
    } else {
        format!("Q[{k}]")
    }
}

fn plain_q_power(q_half: i64) -> Option<String> {
    match q_half {
        0 => None,
        2 => Some("Q".to_string()),
        p if p % 2 == 0 => Some(format!("Q^{}", p / 2)),
        p => Some(format!("Q^({p}/2)")),
    }
}

fn plain_factors(key: &MonomialKey) -> Vec<String> {
    let mut out: Vec<String> = key
        .deriv_exponents()
        .iter()
        .map(|&(k, e)| {
            let name = plain_deriv_name(k);
            if e == 1 {
                name
            } else {
                format!("{name}^{e}")
            }
        })
        .collect();
    out.extend(plain_q_power(key.q_half_exponent()));
    out
}

/// `-1/4 * Q' * Q^-1` style rendering; inverse of `parse_plain`.
pub(super) fn plain(e: &DiffExpr) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let mut s = String::new();
    for (i, (key, c)) in e.iter().enumerate() {
        let (neg, abs) = split_sign(c);
        match (i, neg) {
            (0, true) => s.push('-'),
            (0, false) => {}
            (_, true) => s.push_str(" - "),
            (_, false) => s.push_str(" + "),
        }
        let factors = plain_factors(key);
        let mut parts = Vec::with_capacity(factors.len() + 1);
        if !abs.is_one() || factors.is_empty() {
            parts.push(abs.to_string());
        }
        parts.extend(factors);
        s.push_str(&parts.join(" * "));
    }
    s
}

fn latex_deriv(k: u32, e: u32) -> String {
    let base = if k <= 3 {
        format!("Q{}", "'".repeat(k as usize))
    } else {
        format!("Q^{{({k})}}")
    };
    if e == 1 {
        base
    } else {
        format!("({base})^{{{e}}}")
    }
}

fn latex_q(abs_half: i64) -> Option<String> {
    match abs_half {
        0 => None,
        2 => Some("Q".to_string()),
        p if p % 2 == 0 => Some(format!("Q^{{{}}}", p / 2)),
        p => Some(format!("Q^{{{p}/2}}")),
    }
}

fn latex_monomial(key: &MonomialKey, abs: &Rational) -> String {
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    let numer = abs.numer().to_string();
    let denom = abs.denom().to_string();
    let has_factors = !key.deriv_exponents().is_empty() || key.q_half_exponent() != 0;
    if numer != "1" || !has_factors {
        num.push(numer);
    }
    if denom != "1" {
        den.push(denom);
    }
    for &(k, e) in key.deriv_exponents() {
        num.push(latex_deriv(k, e));
    }
    let p = key.q_half_exponent();
    if p > 0 {
        num.extend(latex_q(p));
    } else if p < 0 {
        den.extend(latex_q(-p));
    }
    if num.is_empty() {
        num.push("1".to_string());
    }
    if den.is_empty() {
        num.join(" ")
    } else {
        format!("\\frac{{{}}}{{{}}}", num.join(" "), den.join(" "))
    }
}

/// LaTeX rendering with negative powers of `Q` moved into a denominator.
pub(super) fn latex(e: &DiffExpr) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let mut s = String::new();
    for (i, (key, c)) in e.iter().enumerate() {
        let (neg, abs) = split_sign(c);
        match (i, neg) {
            (0, true) => s.push('-'),
            (0, false) => {}
            (_, true) => s.push_str(" - "),
            (_, false) => s.push_str(" + "),
        }
        s.push_str(&latex_monomial(key, &abs));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::{rat, DiffExpr, MonomialKey};

    #[test]
    fn plain_forms() {
        let t1 = DiffExpr::monomial(rat(-1, 4), MonomialKey::new(-2, [(1, 1)]));
        assert_eq!(t1.to_plain(), "-1/4 * Q' * Q^-1");
        assert_eq!((-DiffExpr::q_power(1)).to_plain(), "-Q^(1/2)");
        assert_eq!(DiffExpr::zero().to_plain(), "0");
        let e = DiffExpr::from_terms([
            (rat(3, 1), MonomialKey::default()),
            (rat(-2, 1), MonomialKey::new(2, [(5, 2)])),
        ]);
        assert_eq!(e.to_plain(), "3 - 2 * Q[5]^2 * Q");
    }

    #[test]
    fn latex_forms() {
        let t2 = DiffExpr::from_terms([
            (rat(5, 32), MonomialKey::new(-5, [(1, 2)])),
            (rat(-1, 8), MonomialKey::new(-3, [(2, 1)])),
        ]);
        assert_eq!(t2.to_latex(), "\\frac{5 (Q')^{2}}{32 Q^{5/2}} - \\frac{Q''}{8 Q^{3/2}}");
        let t1 = DiffExpr::monomial(rat(-1, 4), MonomialKey::new(-2, [(1, 1)]));
        assert_eq!(t1.to_latex(), "-\\frac{Q'}{4 Q}");
        assert_eq!(DiffExpr::monomial(rat(1, 3), MonomialKey::new(-2, [])).to_latex(), "\\frac{1}{3 Q}");
    }
}
