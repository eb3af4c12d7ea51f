//! JSON layout of a [`DiffExpr`]:
//!
//! ```json
//! { "plain": "-1/4 * Q' * Q^-1",
//!   "monomials": [ { "coeff": "-1/4", "q_half_exponent": -2, "deriv_exponents": [[1, 1]] } ] }
//! ```
//!
//! `monomials` is authoritative on input; `plain` is informational.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DiffExpr, MonomialKey, Rational};

#[derive(Serialize, Deserialize)]
struct MonomialJson {
    coeff: String,
    q_half_exponent: i64,
    deriv_exponents: Vec<[u32; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ExprJson {
    #[serde(default)]
    plain: String,
    monomials: Vec<MonomialJson>,
}

impl Serialize for DiffExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ExprJson {
            plain: self.to_plain(),
            monomials: self
                .iter()
                .map(|(k, c)| MonomialJson {
                    coeff: c.to_string(),
                    q_half_exponent: k.q_half_exponent(),
                    deriv_exponents: k.deriv_exponents().iter().map(|&(k, e)| [k, e]).collect(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiffExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ExprJson::deserialize(d)?;
        let mut terms = Vec::with_capacity(raw.monomials.len());
        for m in raw.monomials {
            let c: Rational = m.coeff.parse().map_err(|_| D::Error::custom(format!("bad coefficient {:?}", m.coeff)))?;
            if m.deriv_exponents.iter().any(|&[k, e]| k == 0 || e == 0) {
                return Err(D::Error::custom("derivative orders and exponents must be >= 1"));
            }
            let key = MonomialKey::new(m.q_half_exponent, m.deriv_exponents.into_iter().map(|[k, e]| (k, e)));
            terms.push((c, key));
        }
        Ok(DiffExpr::from_terms(terms))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{rat, DiffExpr, MonomialKey};

    #[test]
    fn json_round_trip() {
        let e = DiffExpr::from_terms([
            (rat(5, 32), MonomialKey::new(-5, [(1, 2)])),
            (rat(-1, 8), MonomialKey::new(-3, [(2, 1)])),
        ]);
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"coeff\":\"5/32\""));
        let back: DiffExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn json_rejects_zero_order() {
        let s = r#"{"monomials":[{"coeff":"1","q_half_exponent":0,"deriv_exponents":[[0,1]]}]}"#;
        assert!(serde_json::from_str::<DiffExpr>(s).is_err());
    }
}
