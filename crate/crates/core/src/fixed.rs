//! Exact fixed-point decimal scalar.
//!
//! Every cost, toll, demand and model coefficient in the crate is a [`Fixed`]:
//! a signed 128-bit integer counting units of 10^-18. Sums, differences and
//! integer multiples are exact, so the strict comparisons used by the
//! dominance rule never see rounding ties.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

/// Number of decimal places carried by [`Fixed`].
pub const DECIMALS: u32 = 18;
/// Raw units per 1.0.
pub const SCALE: i128 = 1_000_000_000_000_000_000;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fixed(i128);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid decimal literal `{literal}`: {reason}")]
pub struct ParseFixedError {
    pub literal: String,
    pub reason: &'static str,
}

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(SCALE);

    pub const fn from_raw(raw: i128) -> Self {
        Fixed(raw)
    }

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub const fn from_int(value: i64) -> Self {
        Fixed(value as i128 * SCALE)
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn abs(self) -> Self {
        Fixed(self.0.abs())
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Exact multiplication by an integer.
    pub fn mul_int(self, k: i128) -> Self {
        Fixed(self.0 * k)
    }

    /// Product of two fixed-point values, truncated toward zero to the
    /// nearest representable unit. Only used where an exact product is not
    /// required (perturbation magnitudes).
    pub fn mul_truncated(self, other: Self) -> Self {
        let product = BigInt::from(self.0) * BigInt::from(other.0) / BigInt::from(SCALE);
        Fixed(i128::try_from(product).expect("fixed-point product overflow"))
    }

    pub fn to_f64(self) -> f64 {
        let int = self.0 / SCALE;
        let frac = self.0 % SCALE;
        int as f64 + frac as f64 / SCALE as f64
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.0), BigInt::from(SCALE))
    }

    /// Nearest representable value to a float (used only when reading solver
    /// output back into exact form).
    pub fn from_f64_rounded(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let scaled = (value * SCALE as f64).round();
        if scaled.abs() >= i128::MAX as f64 {
            return None;
        }
        Some(Fixed(scaled as i128))
    }
}

impl FromStr for Fixed {
    type Err = ParseFixedError;

    /// Parses `[+-]digits[.digits][e[+-]digits]` exactly. Literals that need
    /// more than 18 decimal places are rejected rather than rounded.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ParseFixedError {
            literal: s.to_string(),
            reason,
        };
        let text = s.trim();
        let (negative, body) = match text.as_bytes().first() {
            Some(b'-') => (true, &text[1..]),
            Some(b'+') => (false, &text[1..]),
            _ => (false, text),
        };
        let (mantissa, exponent) = match body.find(['e', 'E']) {
            Some(pos) => {
                let exp: i32 = body[pos + 1..]
                    .parse()
                    .map_err(|_| err("malformed exponent"))?;
                (&body[..pos], exp)
            }
            None => (body, 0),
        };
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((i, f)) => (i, f),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err("no digits"));
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err("unexpected character"));
        }
        let digits: String = format!("{int_part}{frac_part}");
        let digits = digits.trim_start_matches('0');
        let mut value = BigInt::from(0);
        for b in digits.bytes() {
            value = value * 10 + (b - b'0') as u32;
        }
        // value * 10^(exponent - frac_len) * 10^18
        let shift = DECIMALS as i64 + exponent as i64 - frac_part.len() as i64;
        let value = if shift >= 0 {
            if shift > 60 {
                return Err(err("out of range"));
            }
            value * BigInt::from(10).pow(shift as u32)
        } else {
            let divisor = BigInt::from(10).pow((-shift) as u32);
            if &value % &divisor != BigInt::from(0) {
                return Err(err("more than 18 decimal places"));
            }
            value / divisor
        };
        let raw = i128::try_from(value).map_err(|_| err("out of range"))?;
        Ok(Fixed(if negative { -raw } else { raw }))
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let magnitude = self.0.unsigned_abs();
        let int = magnitude / SCALE as u128;
        let frac = magnitude % SCALE as u128;
        if frac == 0 {
            write!(f, "{sign}{int}")
        } else {
            let frac = format!("{frac:018}");
            write!(f, "{sign}{int}.{}", frac.trim_end_matches('0'))
        }
    }
}

impl fmt::Debug for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Add for Fixed {
    type Output = Fixed;
    fn add(self, rhs: Fixed) -> Fixed {
        Fixed(self.0 + rhs.0)
    }
}

impl Sub for Fixed {
    type Output = Fixed;
    fn sub(self, rhs: Fixed) -> Fixed {
        Fixed(self.0 - rhs.0)
    }
}

impl Neg for Fixed {
    type Output = Fixed;
    fn neg(self) -> Fixed {
        Fixed(-self.0)
    }
}

impl AddAssign for Fixed {
    fn add_assign(&mut self, rhs: Fixed) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Fixed {
    fn sub_assign(&mut self, rhs: Fixed) {
        self.0 -= rhs.0;
    }
}

impl Sum for Fixed {
    fn sum<I: Iterator<Item = Fixed>>(iter: I) -> Fixed {
        iter.fold(Fixed::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Fixed> for Fixed {
    fn sum<I: Iterator<Item = &'a Fixed>>(iter: I) -> Fixed {
        iter.copied().sum()
    }
}

impl From<i64> for Fixed {
    fn from(value: i64) -> Self {
        Fixed::from_int(value)
    }
}
