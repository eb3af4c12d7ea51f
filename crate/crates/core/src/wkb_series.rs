//! All-order WKB terms `T_n = S_n'` and the total-derivative structure of the
//! odd terms.
//!
//! With `T_0 = -Q^(1/2)` the terms follow from
//!
//! ```text
//! T_n = -1/(2 T_0) * [ T_{n-1}' + sum_{m=1}^{n-1} T_m T_{n-m} ],   n >= 1
//! ```
//!
//! The odd and even members are rescaled as `F_j = 2 T_{2j+1}` and
//! `G_j = -T_{2j} / T_0`; then `F_n = G_n' + sum_{m=1}^{n-1} G_m F_{n-m}` and
//! `F_n = d/dx Phi_n` with
//!
//! ```text
//! Phi_n = sum_{l=1}^{n} (1/l) sum_{(c_1..c_l) composition of n} G_{c_1} ... G_{c_l}
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffpoly::{rat, DiffExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("{what} index {index} out of range (series holds T_0..T_{max_order})")]
    OutOfRange { what: &'static str, index: usize, max_order: usize },
    #[error("{what}_{index} contains a power of Q of the wrong parity")]
    Parity { what: &'static str, index: usize },
}

/// `T_0 ..= T_N` as exact differential polynomials in `Q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WkbSeries {
    max_order: usize,
    terms: Vec<DiffExpr>,
}

/// `T_0 = -Q^(1/2)`.
pub fn leading_term() -> DiffExpr {
    -DiffExpr::q_power(1)
}

/// `1 / T_0 = -Q^(-1/2)`; division by `T_0` is multiplication by this.
fn inverse_leading() -> DiffExpr {
    -DiffExpr::q_power(-1)
}

/// `sum_{m=lo}^{hi} T_m T_{n-m}`, using the symmetry of the summand.
fn convolution(terms: &[DiffExpr], n: usize, lo: usize, hi: usize) -> DiffExpr {
    let mut acc = DiffExpr::zero();
    let mut m = lo;
    while m <= hi && m <= n - m {
        let prod = &terms[m] * &terms[n - m];
        if m != n - m && n - m <= hi && n - m >= lo {
            acc = &acc + &prod.scale(&rat(2, 1));
        } else {
            acc = &acc + &prod;
        }
        m += 1;
    }
    acc
}

/// Generates `T_0 ..= T_N` by the primary recursion.
pub fn gen_terms(max_order: usize) -> WkbSeries {
    let inv_t0 = inverse_leading();
    let half = rat(-1, 2);
    let mut terms = Vec::with_capacity(max_order + 1);
    terms.push(leading_term());
    for n in 1..=max_order {
        let bracket = &terms[n - 1].differentiate() + &convolution(&terms, n, 1, n - 1);
        terms.push((&inv_t0 * &bracket).scale(&half));
    }
    WkbSeries { max_order, terms }
}

/// Generates the same terms through the rearranged recursion
/// `T_n = -1/2 [ (T_{n-1}/T_0)' + (1/T_0) sum_{m=2}^{n-2} T_m T_{n-m} ]`, `n >= 3`.
/// Used to cross-check [`gen_terms`].
pub fn gen_terms_alternate(max_order: usize) -> WkbSeries {
    let inv_t0 = inverse_leading();
    let half = rat(-1, 2);
    let mut terms = vec![leading_term()];
    if max_order >= 1 {
        // T_1 = -T_0' / (2 T_0)
        let t0 = &terms[0];
        terms.push((&t0.differentiate() * &inv_t0).scale(&half));
    }
    if max_order >= 2 {
        // T_2 = -(T_1' + T_1^2) / (2 T_0)
        let t1 = &terms[1];
        let bracket = &t1.differentiate() + &(t1 * t1);
        terms.push((&bracket * &inv_t0).scale(&half));
    }
    for n in 3..=max_order {
        let ratio = (&terms[n - 1] * &inv_t0).differentiate();
        let interior = if n >= 4 { convolution(&terms, n, 2, n - 2) } else { DiffExpr::zero() };
        terms.push((&ratio + &(&inv_t0 * &interior)).scale(&half));
    }
    WkbSeries { max_order, terms }
}

impl WkbSeries {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn terms(&self) -> &[DiffExpr] {
        &self.terms
    }

    pub fn term(&self, n: usize) -> Result<&DiffExpr, SeriesError> {
        self.terms.get(n).ok_or(SeriesError::OutOfRange {
            what: "T",
            index: n,
            max_order: self.max_order,
        })
    }

    fn check_index(&self, what: &'static str, index: usize, needed: usize) -> Result<(), SeriesError> {
        if index == 0 || needed > self.max_order {
            Err(SeriesError::OutOfRange {
                what,
                index,
                max_order: self.max_order,
            })
        } else {
            Ok(())
        }
    }

    /// `2 T_0 T_n + sum_{j=1}^{n-1} T_j T_{n-j} + T_{n-1}'`, which must vanish for `n >= 1`.
    pub fn recursion_residual(&self, n: usize) -> Result<DiffExpr, SeriesError> {
        if n == 0 || n > self.max_order {
            return Err(SeriesError::OutOfRange {
                what: "residual",
                index: n,
                max_order: self.max_order,
            });
        }
        let t = &self.terms;
        let lead = (&t[0] * &t[n]).scale(&rat(2, 1));
        let mut sum = DiffExpr::zero();
        for j in 1..n {
            sum = &sum + &(&t[j] * &t[n - j]);
        }
        Ok(&(&lead + &sum) + &t[n - 1].differentiate())
    }

    /// `G_j = -T_{2j} / T_0 = T_{2j} Q^(-1/2)`; only integer powers of `Q`.
    pub fn g_term(&self, j: usize) -> Result<DiffExpr, SeriesError> {
        self.check_index("G", j, 2 * j)?;
        let g = &self.terms[2 * j] * &DiffExpr::q_power(-1);
        if !g.has_only_integer_q_powers() {
            return Err(SeriesError::Parity { what: "G", index: j });
        }
        Ok(g)
    }

    /// `F_j = 2 T_{2j+1}`; only integer powers of `Q`.
    pub fn f_term(&self, j: usize) -> Result<DiffExpr, SeriesError> {
        self.check_index("F", j, 2 * j + 1)?;
        let f = self.terms[2 * j + 1].scale(&rat(2, 1));
        if !f.has_only_integer_q_powers() {
            return Err(SeriesError::Parity { what: "F", index: j });
        }
        Ok(f)
    }

    fn g_terms(&self, n: usize) -> Result<Vec<DiffExpr>, SeriesError> {
        // index 0 is a placeholder so that gs[j] = G_j
        let mut gs = vec![DiffExpr::zero()];
        for j in 1..=n {
            gs.push(self.g_term(j)?);
        }
        Ok(gs)
    }

    /// Exact check of `F_n = G_n' + sum_{m=1}^{n-1} G_m F_{n-m}`.
    pub fn check_f_recursion(&self, n: usize) -> Result<bool, SeriesError> {
        self.check_index("F", n, 2 * n + 1)?;
        let gs = self.g_terms(n)?;
        let mut rhs = gs[n].differentiate();
        for m in 1..n {
            rhs = &rhs + &(&gs[m] * &self.f_term(n - m)?);
        }
        Ok(rhs == self.f_term(n)?)
    }

    /// Antiderivative `Phi_n` of `F_n`, built from the ordered compositions of `n`.
    pub fn build_phi(&self, n: usize) -> Result<DiffExpr, SeriesError> {
        self.build_phi_counted(n).map(|(phi, _)| phi)
    }

    /// [`build_phi`](Self::build_phi) plus the number of composition products summed.
    pub fn build_phi_counted(&self, n: usize) -> Result<(DiffExpr, u64), SeriesError> {
        self.check_index("Phi", n, 2 * n)?;
        let gs = self.g_terms(n)?;
        let mut count = 0u64;
        // by_length[l] accumulates products over compositions with l parts
        let mut by_length = vec![DiffExpr::zero(); n + 1];
        for composition in Compositions::new(n) {
            let mut prod = DiffExpr::one();
            for &part in &composition {
                prod = &prod * &gs[part];
            }
            let l = composition.len();
            by_length[l] = &by_length[l] + &prod;
            count += 1;
        }
        let phi = by_length
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, e)| e.scale(&rat(1, l as i64)))
            .sum();
        Ok((phi, count))
    }

    /// Builds `F_n` and `Phi_n` and checks `Phi_n' = F_n` exactly.
    pub fn certify_total_derivative(&self, n: usize) -> Result<OddTermCertificate, SeriesError> {
        self.check_index("F", n, 2 * n + 1)?;
        let f_n = self.f_term(n)?;
        let phi_n = self.build_phi(n)?;
        let verified = phi_n.differentiate() == f_n;
        Ok(OddTermCertificate { n, f_n, phi_n, verified })
    }

    /// Certificates for `n = 1..=n_max`, computed in parallel.
    pub fn certify_range(&self, n_max: usize) -> Result<Vec<OddTermCertificate>, SeriesError> {
        (1..=n_max)
            .into_par_iter()
            .map(|n| self.certify_total_derivative(n))
            .collect()
    }
}

/// Evidence that `S_{2n+1}' = F_n / 2` is the derivative of `Phi_n / 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddTermCertificate {
    pub n: usize,
    pub f_n: DiffExpr,
    pub phi_n: DiffExpr,
    pub verified: bool,
}

impl OddTermCertificate {
    /// Index of the WKB term covered, `2n + 1`.
    pub fn wkb_index(&self) -> usize {
        2 * self.n + 1
    }

    /// Antiderivative of `S_{2n+1}'` itself, `Phi_n / 2`.
    pub fn s_antiderivative(&self) -> DiffExpr {
        self.phi_n.scale(&rat(1, 2))
    }
}

/// Iterator over the `2^(n-1)` ordered compositions of `n >= 1`.
pub struct Compositions {
    n: usize,
    mask: u64,
    end: u64,
}

impl Compositions {
    pub fn new(n: usize) -> Self {
        assert!((1..=63).contains(&n), "composition size out of range");
        Compositions {
            n,
            mask: 0,
            end: 1u64 << (n - 1),
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.mask >= self.end {
            return None;
        }
        // bit i set = cut between position i and i+1
        let mut parts = Vec::new();
        let mut run = 1;
        for i in 0..self.n - 1 {
            if self.mask >> i & 1 == 1 {
                parts.push(run);
                run = 1;
            } else {
                run += 1;
            }
        }
        parts.push(run);
        self.mask += 1;
        Some(parts)
    }
}
