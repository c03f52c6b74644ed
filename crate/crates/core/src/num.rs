//! Extended-precision scalar type.
//!
//! Every value in the core is an MPFR float. A [`Precision`] is carried
//! alongside the data that needs it and is the only way new values are
//! created, so a computation never mixes precisions by accident.

use rug::float::Constant;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radix-2 floating point value, round-to-nearest.
pub type BigReal = Float;

/// Working precision in bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Precision(u32);

impl Precision {
    pub const MIN_BITS: u32 = 64;
    pub const DEFAULT: Precision = Precision(192);
    /// Reduced precision used inside the variational search.
    pub const SEARCH: Precision = Precision(96);

    pub fn new(bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(Error::InvalidParam(format!(
                "precision must be at least {} bits, got {bits}",
                Self::MIN_BITS
            )));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Decimal digits carried by the mantissa.
    pub fn digits(self) -> u32 {
        (self.0 as f64 * std::f64::consts::LOG10_2).floor() as u32
    }

    pub fn real(self, x: f64) -> BigReal {
        Float::with_val(self.0, x)
    }

    pub fn int(self, i: i64) -> BigReal {
        Float::with_val(self.0, i)
    }

    pub fn ratio(self, num: i64, den: i64) -> BigReal {
        Float::with_val(self.0, num) / den
    }

    pub fn zero(self) -> BigReal {
        Float::new(self.0)
    }

    pub fn one(self) -> BigReal {
        Float::with_val(self.0, 1)
    }

    pub fn pi(self) -> BigReal {
        Float::with_val(self.0, Constant::Pi)
    }

    pub fn ln2(self) -> BigReal {
        Float::with_val(self.0, Constant::Log2)
    }

    /// Unit roundoff, 2^(1 - bits).
    pub fn epsilon(self) -> BigReal {
        Float::with_val(self.0, 1) >> (self.0 as i32 - 1)
    }

    pub fn parse(self, s: &str) -> Result<BigReal> {
        Float::parse(s)
            .map(|p| Float::with_val(self.0, p))
            .map_err(|e| Error::InvalidParam(format!("cannot parse {s:?} as a number: {e}")))
    }

    /// Converts `x` to this precision (rounding if it carries more bits).
    pub fn of(self, x: &BigReal) -> BigReal {
        Float::with_val(self.0, x)
    }

    /// Precision raised by `extra` guard bits.
    pub fn guarded(self, extra: u32) -> Precision {
        Precision(self.0 + extra)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<u32> for Precision {
    type Error = Error;
    fn try_from(bits: u32) -> Result<Self> {
        Precision::new(bits)
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.0
    }
}

/// Scientific notation with `digits` significant digits, e.g. `1.6075e0`.
pub fn to_sci(x: &BigReal, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let s = format!("{:.*e}", digits.max(1), x);
    s.replace("e+", "e")
}

/// Serde adapter writing a BigReal as a decimal string with all the
/// digits its precision carries, and reading it back at a matching precision.
pub mod serde_big {
    use rug::Float;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{to_sci, BigReal, Precision};

    pub fn serialize<S: Serializer>(x: &BigReal, s: S) -> Result<S::Ok, S::Error> {
        let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).floor() as usize;
        s.serialize_str(&to_sci(x, digits))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigReal, D::Error> {
        let text = String::deserialize(d)?;
        let digits = text.chars().filter(|c| c.is_ascii_digit()).count() as f64;
        let bits = ((digits * std::f64::consts::LOG2_10).ceil() as u32 + 8).max(Precision::MIN_BITS);
        Float::parse(&text)
            .map(|p| Float::with_val(bits, p))
            .map_err(serde::de::Error::custom)
    }
}

pub(crate) fn ensure_finite(v: &BigReal, x: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            x,
            what: what.to_string(),
        })
    }
}
