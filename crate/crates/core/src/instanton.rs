//! One-instanton asymptotic series for the level splitting of the double well,
//!
//! ```text
//! ΔE = 2^{11/4}/√π · |a|^{5/4} e^{−√2|a|^{3/2}/6} · (1 + Σ_{k=1}^{4} c_k g^k),   g = 1/(√2|a|^{3/2}),
//! ```
//!
//! with exact rational coefficients c_k.

use rug::ops::Pow;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{serde_big, to_sci, BigReal, Precision};

pub const MAX_ORDER: usize = 4;

/// (numerator, denominator) of c₁…c₄.
const COEFFS: [(i64, i64); MAX_ORDER] = [
    (-71, 12),
    (-6299, 288),
    (-2691107, 10368),
    (-2125346615, 497664),
];

pub fn coefficient(k: usize) -> Option<Rational> {
    k.checked_sub(1)
        .and_then(|i| COEFFS.get(i))
        .map(|&(n, d)| Rational::from((n, d)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapSeries {
    pub a: f64,
    #[serde(with = "serde_big")]
    pub prefactor: BigReal,
    /// prefactor · c_k g^k for k = 1..4.
    #[serde(skip)]
    pub terms: Vec<BigReal>,
    /// Values through order 0..=4.
    #[serde(skip)]
    pub partial_sums: Vec<BigReal>,
}

impl GapSeries {
    pub fn new(a: f64, prec: Precision) -> Result<Self> {
        if !(a < 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!(
                "the instanton series needs a double well (a < 0), got a = {a}"
            )));
        }
        let p = prec.bits();
        let abs_a = prec.real(-a);
        let a32 = Float::with_val(p, abs_a.sqrt_ref()) * &abs_a;
        let sqrt2 = Float::with_val(p, 2).sqrt();
        let expo = Float::with_val(p, &sqrt2 * &a32) / 6u32;
        let two_11_4 = Float::with_val(p, 2).pow(Float::with_val(p, 11) / 4u32);
        let a54 = abs_a.clone().pow(Float::with_val(p, 5) / 4u32);
        let prefactor = two_11_4 / prec.pi().sqrt() * a54 * (-expo).exp();
        let g = (sqrt2 * a32).recip();

        let mut terms = Vec::with_capacity(MAX_ORDER);
        let mut partial_sums = vec![prefactor.clone()];
        let mut gk = prec.one();
        for k in 1..=MAX_ORDER {
            gk *= &g;
            let c = Float::with_val(p, &coefficient(k).expect("k ≤ MAX_ORDER"));
            let term = Float::with_val(p, &c * &gk) * &prefactor;
            let next = Float::with_val(p, partial_sums.last().expect("non-empty") + &term);
            terms.push(term);
            partial_sums.push(next);
        }
        Ok(GapSeries {
            a,
            prefactor,
            terms,
            partial_sums,
        })
    }

    pub fn value(&self, order: usize) -> Result<&BigReal> {
        self.partial_sums.get(order).ok_or_else(|| {
            Error::InvalidParam(format!("instanton order must be 0..={MAX_ORDER}, got {order}"))
        })
    }

    /// Relative deviations (S_k − reference)/reference of each partial sum.
    pub fn deviations(&self, reference: &BigReal) -> Vec<BigReal> {
        let p = reference.prec();
        self.partial_sums
            .iter()
            .map(|s| Float::with_val(p, s - reference) / reference)
            .collect()
    }
}

/// Prefactor times the series through `order` corrections.
pub fn gap_asymptotic(a: f64, order: usize, prec: Precision) -> Result<BigReal> {
    Ok(GapSeries::new(a, prec)?.value(order)?.clone())
}

/// One row of the partial-sum table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantonRow {
    pub order: usize,
    pub value: String,
    /// Relative deviation from the supplied gap, when one is given.
    pub deviation: Option<f64>,
}

pub fn table(series: &GapSeries, reference: Option<&BigReal>, digits: usize) -> Vec<InstantonRow> {
    let devs = reference.map(|r| series.deviations(r));
    series
        .partial_sums
        .iter()
        .enumerate()
        .map(|(order, v)| InstantonRow {
            order,
            value: to_sci(v, digits),
            deviation: devs.as_ref().map(|d| d[order].to_f64()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: Precision = Precision::DEFAULT;

    fn six(x: &BigReal) -> String {
        to_sci(x, 6)
    }

    #[test]
    fn printed_partial_sums_at_minus_twenty() {
        let s = GapSeries::new(-20.0, P).unwrap();
        assert_eq!(six(s.value(0).unwrap()), "1.12154e-7");
        assert_eq!(six(s.value(1).unwrap()), "1.06908e-7");
        assert_eq!(six(s.value(2).unwrap()), "1.06754e-7");
        assert_eq!(six(s.value(4).unwrap()), "1.06738e-7");
    }

    #[test]
    fn rejects_single_well_and_bad_order() {
        assert!(matches!(GapSeries::new(0.0, P), Err(Error::Domain(_))));
        assert!(matches!(GapSeries::new(1.0, P), Err(Error::Domain(_))));
        assert!(gap_asymptotic(-20.0, 5, P).is_err());
    }

    #[test]
    fn terms_shrink_deep_in_the_double_well() {
        let s = GapSeries::new(-50.0, P).unwrap();
        let mags: Vec<f64> = std::iter::once(s.prefactor.to_f64())
            .chain(s.terms.iter().map(|t| t.to_f64().abs()))
            .collect();
        assert!(mags.windows(2).all(|w| w[1] < w[0]), "{mags:?}");
    }

    #[test]
    fn coefficients_are_exact() {
        assert_eq!(coefficient(1).unwrap(), Rational::from((-71, 12)));
        assert_eq!(coefficient(4).unwrap(), Rational::from((-2125346615i64, 497664)));
        assert!(coefficient(0).is_none() && coefficient(5).is_none());
    }

    #[test]
    fn deviation_of_reference_is_zero() {
        let s = GapSeries::new(-20.0, P).unwrap();
        let d = s.deviations(s.value(2).unwrap());
        assert!(d[2].is_zero());
        assert!(d[0].to_f64() > 0.0);
    }
}
