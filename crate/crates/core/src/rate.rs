//! Exact sampling rates.
//!
//! Rates are kept as reduced fractions so that targets such as `floor(r·N)`
//! and the comparison-count predictions are computed without rounding.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleRate(Ratio<u64>);

impl SampleRate {
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::Config("sample rate has a zero denominator".into()));
        }
        let r = Ratio::new(numer, denom);
        if r.is_zero() || r > Ratio::from_integer(1) {
            return Err(Error::Config(format!(
                "sample rate {numer}/{denom} is outside (0, 1]"
            )));
        }
        Ok(SampleRate(r))
    }

    /// Converts through the shortest decimal representation of `value`, so
    /// `0.01` becomes exactly 1/100.
    pub fn from_f64(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Config(format!("sample rate {value} is not finite")));
        }
        format!("{value}").parse()
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `floor(r · n)`.
    pub fn floor_of(&self, n: u64) -> u64 {
        (u128::from(n) * u128::from(self.numer()) / u128::from(self.denom())) as u64
    }

    /// Whether `r · n` is an integer.
    pub fn divides(&self, n: u64) -> bool {
        (u128::from(n) * u128::from(self.numer())) % u128::from(self.denom()) == 0
    }
}

impl fmt::Display for SampleRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl FromStr for SampleRate {
    type Err = Error;

    /// Parses a decimal such as `0.25`, `.5`, `1` or `2.5e-3` exactly.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse sample rate {text:?}"));
        let t = text.trim();
        let (mantissa, exponent) = match t.find(['e', 'E']) {
            Some(pos) => {
                let exp: i32 = t[pos + 1..].parse().map_err(|_| bad())?;
                (&t[..pos], exp)
            }
            None => (t, 0),
        };
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((i, f)) => (i, f),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part
            .chars()
            .chain(frac_part.chars())
            .all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let digits = digits.trim_start_matches('0');
        let scale = i64::from(exponent) - frac_part.len() as i64;
        // Anything with more than 18 significant digits cannot be a rate we can
        // represent exactly over u64.
        if digits.len() > 18 || scale.abs() > 18 {
            return Err(Error::Config(format!(
                "sample rate {text:?} has too many digits to represent exactly"
            )));
        }
        let numer: u64 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| bad())?
        };
        let pow = 10u64.pow(scale.unsigned_abs() as u32);
        let rate = if scale >= 0 {
            let n = numer.checked_mul(pow).ok_or_else(bad)?;
            SampleRate::new(n, 1)
        } else {
            SampleRate::new(numer, pow)
        };
        rate.map_err(|_| Error::Config(format!("sample rate {t} is outside (0, 1]")))
    }
}
