use dunham::diffpoly::{rat, DiffExpr, MonomialKey};
use dunham::wkb_series::{gen_terms, gen_terms_alternate, Compositions, WkbSeries};
use proptest::prelude::*;
use std::sync::OnceLock;

fn series() -> &'static WkbSeries {
    static S: OnceLock<WkbSeries> = OnceLock::new();
    S.get_or_init(|| gen_terms(15))
}

fn mono(num: i64, den: i64, q_half: i64, derivs: &[(u32, u32)]) -> (dunham::diffpoly::Rational, MonomialKey) {
    (rat(num, den), MonomialKey::new(q_half, derivs.iter().copied()))
}

#[test]
fn both_recursions_agree_to_fifteen() {
    assert_eq!(&gen_terms_alternate(15), series());
}

#[test]
fn residuals_vanish() {
    for n in 1..=15 {
        assert!(series().recursion_residual(n).unwrap().is_zero(), "n = {n}");
    }
}

#[test]
fn parity_of_q_powers() {
    for (n, t) in series().terms().iter().enumerate() {
        if n % 2 == 0 {
            assert!(t.has_only_half_odd_q_powers(), "T_{n}");
        } else {
            assert!(t.has_only_integer_q_powers(), "T_{n}");
        }
    }
}

#[test]
fn terms_are_homogeneous() {
    // T_n carries n derivatives and scales as lambda^((1 - n)/2) under Q -> lambda Q
    for (n, t) in series().terms().iter().enumerate() {
        for m in t.monomials() {
            assert_eq!(m.key.weight(), n as u64, "T_{n}");
            let deg: i64 = m.key.q_half_exponent() + 2 * m.key.deriv_exponents().iter().map(|&(_, e)| e as i64).sum::<i64>();
            assert_eq!(deg, 1 - n as i64, "T_{n}: {}", t);
        }
    }
}

#[test]
fn monomial_counts_grow() {
    let counts: Vec<usize> = series().terms().iter().map(DiffExpr::len).collect();
    assert_eq!(&counts[..4], &[1, 1, 2, 3]);
    for n in 3..counts.len() {
        assert!(counts[n] >= counts[n - 1], "{counts:?}");
    }
}

#[test]
fn third_term_is_an_explicit_derivative() {
    let s = series();
    let inner = DiffExpr::from_terms([mono(5, 64, -6, &[(1, 2)]), mono(-1, 16, -4, &[(2, 1)])]);
    assert_eq!(s.terms()[3], inner.differentiate());
    let ratio = &s.terms()[2] * &DiffExpr::q_power(-1);
    // -1/2 (T_2 / T_0)' with T_0 = -Q^(1/2)
    assert_eq!(s.terms()[3], ratio.differentiate().scale(&rat(1, 2)));
}

#[test]
fn f_recursion_holds() {
    for n in 1..=7 {
        assert!(series().check_f_recursion(n).unwrap(), "n = {n}");
    }
}

#[test]
fn composition_counts() {
    for n in 1..=15 {
        let all: Vec<Vec<usize>> = Compositions::new(n).collect();
        assert_eq!(all.len(), 1 << (n - 1));
        assert!(all.iter().all(|c| c.iter().sum::<usize>() == n && c.iter().all(|&p| p > 0)));
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), all.len());
    }
    let (_, count) = series().build_phi_counted(7).unwrap();
    assert_eq!(count, 64);
}

#[test]
fn antiderivatives_match_bracket_forms() {
    let s = series();
    let g: Vec<DiffExpr> = (1..=4).map(|j| s.g_term(j).unwrap()).collect();
    let (g1, g2, g3, g4) = (&g[0], &g[1], &g[2], &g[3]);
    let phi2 = g2 + &(g1 * g1).scale(&rat(1, 2));
    let phi3 = &(g3 + &(g1 * g2)) + &g1.pow(3).scale(&rat(1, 3));
    let phi4 = &(&(&(g4 + &(g1 * g3)) + &(g2 * g2).scale(&rat(1, 2))) + &(&(g1 * g1) * g2)) + &g1.pow(4).scale(&rat(1, 4));
    assert_eq!(s.build_phi(2).unwrap(), phi2);
    assert_eq!(s.build_phi(3).unwrap(), phi3);
    assert_eq!(s.build_phi(4).unwrap(), phi4);
    assert_eq!(s.build_phi(1).unwrap(), g1.clone());
}

#[test]
fn paired_sums_are_half_derivatives() {
    // sum_m G_m G'_{n-m} = 1/2 (sum_m G_m G_{n-m})'
    let s = series();
    for n in 2..=7 {
        let g: Vec<DiffExpr> = (0..n).map(|j| if j == 0 { DiffExpr::zero() } else { s.g_term(j).unwrap() }).collect();
        let mut lhs = DiffExpr::zero();
        let mut inner = DiffExpr::zero();
        for m in 1..n {
            lhs = &lhs + &(&g[m] * &g[n - m].differentiate());
            inner = &inner + &(&g[m] * &g[n - m]);
        }
        assert_eq!(lhs, inner.differentiate().scale(&rat(1, 2)), "n = {n}");
    }
}

#[test]
fn certificates_to_fifteen() {
    let certs = series().certify_range(7).unwrap();
    assert!(certs.iter().all(|c| c.verified));
    assert_eq!(certs.last().unwrap().wkb_index(), 15);
    // S_{2n+1} = Phi_n / 2, so its derivative is T_{2n+1}
    for c in &certs {
        assert_eq!(c.s_antiderivative().differentiate(), series().terms()[c.wkb_index()]);
    }
}

#[test]
fn g_zero_rejected() {
    assert!(series().g_term(0).is_err());
    assert!(series().f_term(0).is_err());
    assert!(series().g_term(8).is_err());
}

#[test]
fn json_round_trip() {
    let text = serde_json::to_string(series()).unwrap();
    let back: WkbSeries = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, series());
    let certs = series().certify_range(3).unwrap();
    let text = serde_json::to_string(&certs).unwrap();
    let back: Vec<dunham::wkb_series::OddTermCertificate> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, certs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetric_convolution(n in 2usize..=15) {
        let t = series().terms();
        let mut full = DiffExpr::zero();
        for m in 1..n {
            full = &full + &(&t[m] * &t[n - m]);
        }
        let mut half = DiffExpr::zero();
        for m in 1..=(n - 1) / 2 {
            half = &half + &(&t[m] * &t[n - m]).scale(&rat(2, 1));
        }
        if n % 2 == 0 {
            half = &half + &(&t[n / 2] * &t[n / 2]);
        }
        prop_assert_eq!(full, half);
    }

    #[test]
    fn plain_text_round_trip(n in 0usize..=15) {
        let t = &series().terms()[n];
        prop_assert_eq!(&DiffExpr::parse_plain(&t.to_plain()).unwrap(), t);
    }
}
