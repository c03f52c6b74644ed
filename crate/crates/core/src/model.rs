//! Problem definition for H = -d²/dx² + a x² + 2 x⁴ and the parameter types
//! shared by every other module.
//!
//! The quartic coefficient is fixed at 2 throughout the crate. Inputs given
//! as (m², g) for -d²/dx² + m² x² + g x⁴ are converted once by
//! [`symanzik_rescale`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Precision;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Node count of the lowest state in this parity class.
    pub fn nodes(self) -> u32 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    /// Sign picked up under x -> -x.
    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    /// Parity of a product of functions with parities `self` and `other`.
    pub fn times(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Parity of the derivative or of the running integral from 0.
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl FromStr for Parity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "even" | "+" | "ground" => Ok(Parity::Even),
            "odd" | "-" | "excited" => Ok(Parity::Odd),
            other => Err(Error::InvalidParam(format!(
                "parity must be even or odd, got {other:?}"
            ))),
        }
    }
}

/// Coupling, working precision and integration cutoff for one problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub a: f64,
    pub precision: Precision,
    pub cutoff: f64,
}

impl OscillatorParams {
    /// Default cutoff: the weight exp(-2φ) has dropped by
    /// 10^-(digits + 10) relative to its peak.
    pub fn new(a: f64, precision: Precision) -> Result<Self> {
        check_coupling(a)?;
        let cutoff = default_cutoff(a, precision);
        Ok(OscillatorParams {
            a,
            precision,
            cutoff,
        })
    }

    pub fn with_cutoff(a: f64, precision: Precision, cutoff: f64) -> Result<Self> {
        check_coupling(a)?;
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::InvalidParam(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        Ok(OscillatorParams {
            a,
            precision,
            cutoff,
        })
    }

    pub fn potential(&self, x: f64) -> f64 {
        potential(self.a, x)
    }
}

pub(crate) fn check_coupling(a: f64) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("coupling a must be finite, got {a}")))
    }
}

pub fn potential(a: f64, x: f64) -> f64 {
    let x2 = x * x;
    a * x2 + 2.0 * x2 * x2
}

/// Bottom of the potential: 0 for a ≥ 0, -a²/8 at x² = -a/4 otherwise.
pub fn potential_minimum(a: f64) -> f64 {
    if a >= 0.0 {
        0.0
    } else {
        -a * a / 8.0
    }
}

/// Position of the right-hand minimum of the potential (0 for a ≥ 0).
pub fn well_position(a: f64) -> f64 {
    if a >= 0.0 {
        0.0
    } else {
        (-a / 4.0).sqrt()
    }
}

/// The two growing terms of the large-|x| phase: (√2/3)|x|³ + a|x|/2^{3/2}.
pub fn leading_phase(a: f64, x: f64) -> f64 {
    let x = x.abs();
    SQRT2 / 3.0 * x * x * x + a * x / (2.0 * SQRT2)
}

/// Smallest X beyond `x_ref` (and beyond the well) at which the leading
/// phase has grown by `decades`·ln(10)/2 over its value at `x_ref`, i.e.
/// exp(-2φ) has dropped by 10^-decades.
pub fn cutoff_from(a: f64, x_ref: f64, decades: f64) -> f64 {
    let start = x_ref.max(well_position(a));
    let target = leading_phase(a, start) + decades * std::f64::consts::LN_10 / 2.0;
    let mut lo = start;
    let mut hi = start.max(1.0);
    while leading_phase(a, hi) < target {
        hi *= 1.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if leading_phase(a, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn default_cutoff(a: f64, precision: Precision) -> f64 {
    cutoff_from(a, well_position(a), precision.digits() as f64 + 10.0)
}

/// Free parameters of the k = 0 trial function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub alpha: f64,
    pub parity: Parity,
}

impl TrialParams {
    pub fn new(big_a: f64, d: f64, alpha: f64, parity: Parity) -> Result<Self> {
        let p = TrialParams {
            big_a,
            d,
            alpha,
            parity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.big_a.is_finite() && self.d.is_finite() && self.alpha.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "trial parameters must be finite: {self:?}"
            )));
        }
        if self.d == 0.0 {
            return Err(Error::InvalidParam("D must be non-zero".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidParam(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if self.parity == Parity::Odd && self.alpha == 0.0 {
            return Err(Error::InvalidParam(
                "odd trial function vanishes identically at alpha = 0".into(),
            ));
        }
        Ok(())
    }

    pub fn as_vec(&self) -> [f64; 3] {
        [self.big_a, self.d, self.alpha]
    }
}

/// Maps (m², g) of -d²/dx² + m²x² + g x⁴ to the coupling `a` of the
/// canonical form with quartic coefficient 2, returning `(a, energy_scale)`
/// with E(m², g) = energy_scale · E(a).
///
/// With x = λξ and λ⁶ = 2/g the operator becomes λ⁻²(-d²/dξ² + m²λ⁴ξ² + 2ξ⁴),
/// so a = m²(2/g)^{2/3} and energy_scale = λ⁻² = (g/2)^{1/3}.
pub fn symanzik_rescale(m2: f64, g: f64) -> Result<(f64, f64)> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("quartic coupling g must be positive, got {g}")));
    }
    if !m2.is_finite() {
        return Err(Error::Domain(format!("m² must be finite, got {m2}")));
    }
    let a = m2 * (2.0 / g).powf(2.0 / 3.0);
    let scale = (g / 2.0).cbrt();
    Ok((a, scale))
}

/// Inverse of [`symanzik_rescale`] at fixed g: m² = a (g/2)^{2/3}.
pub fn symanzik_inverse(a: f64, g: f64) -> Result<f64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("quartic coupling g must be positive, got {g}")));
    }
    Ok(a * (g / 2.0).powf(2.0 / 3.0))
}

/// Length scale x/ξ = (2/g)^{1/6} between the (m², g) frame and the canonical frame.
pub fn length_scale(g: f64) -> Result<f64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("quartic coupling g must be positive, got {g}")));
    }
    Ok((2.0 / g).powf(1.0 / 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rescale_identity_at_g_two() {
        let (a, s) = symanzik_rescale(-5.0, 2.0).unwrap();
        assert!((a + 5.0).abs() < 1e-14);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rescale_zero_mass() {
        let (a, s) = symanzik_rescale(0.0, 8.0).unwrap();
        assert_eq!(a, 0.0);
        assert!((s - 4f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn rescale_critical_pair() {
        let (a, _) = symanzik_rescale(-2.2195970861, 1.0).unwrap();
        assert!((a + 3.523390749).abs() < 1e-8, "a = {a}");
    }

    #[test]
    fn rescale_rejects_bad_g() {
        assert!(matches!(symanzik_rescale(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(symanzik_rescale(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn trial_params_validation() {
        assert!(TrialParams::new(1.0, 0.0, 1.0, Parity::Even).is_err());
        assert!(TrialParams::new(1.0, 2.0, -1.0, Parity::Even).is_err());
        assert!(TrialParams::new(1.0, 2.0, 0.0, Parity::Odd).is_err());
        assert!(TrialParams::new(1.0, 2.0, 0.0, Parity::Even).is_ok());
    }

    #[test]
    fn cutoff_reaches_requested_decay() {
        let p = Precision::DEFAULT;
        for a in [1.0, -1.0, -20.0] {
            let x = default_cutoff(a, p);
            let drop = 2.0 * (leading_phase(a, x) - leading_phase(a, well_position(a)));
            let want = (p.digits() as f64 + 10.0) * std::f64::consts::LN_10;
            assert!((drop - want).abs() < 1e-6, "a = {a}: {drop} vs {want}");
        }
    }

    #[test]
    fn parity_parses() {
        assert_eq!("even".parse::<Parity>().unwrap(), Parity::Even);
        assert_eq!("Odd".parse::<Parity>().unwrap(), Parity::Odd);
        assert!("up".parse::<Parity>().is_err());
    }

    proptest! {
        #[test]
        fn rescale_round_trips(m2 in -50.0f64..50.0, g in 0.01f64..100.0) {
            let (a, _) = symanzik_rescale(m2, g).unwrap();
            let back = symanzik_inverse(a, g).unwrap();
            prop_assert!((back - m2).abs() <= 1e-12 * m2.abs().max(1.0));
        }
    }
}
