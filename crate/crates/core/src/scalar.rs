//! Numeric backends.
//!
//! Every solver and algorithm in this crate is generic over [`Scalar`]. Two
//! backends ship: `f64` (the default, fast) and [`Rational`] (arbitrary
//! precision, used where bit-exact identities have to hold).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::error::ScalarParseError;

/// Exact rational number.
pub type Rational = BigRational;

/// 2^-53, the resolution of [`Scalar::from_unit_bits`].
const UNIT_SCALE: f64 = 1.0 / (1u64 << 53) as f64;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// Exact value of the binary float for rationals.
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    /// Parses `"p/q"`, plain decimals and scientific notation.
    fn parse_number(s: &str) -> Result<Self, ScalarParseError>;

    /// The dyadic number `bits / 2^53`; `bits` must be below `2^53`.
    fn from_unit_bits(bits: u64) -> Self;

    /// Text form used when writing documents back out.
    fn to_text(&self) -> String;

    fn from_u64(n: u64) -> Self;

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// `(1 + n)^(-theta)`. Exact for `theta == 1` in the rational backend.
    fn inverse_power(n: u64, theta: f64) -> Self {
        if theta == 1.0 {
            Self::one() / Self::from_u64(n + 1)
        } else {
            Self::from_f64(((n + 1) as f64).powf(-theta))
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse_number(s: &str) -> Result<Self, ScalarParseError> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: f64 = p.trim().parse().map_err(|_| ScalarParseError::new(s))?;
            let q: f64 = q.trim().parse().map_err(|_| ScalarParseError::new(s))?;
            if q == 0.0 {
                return Err(ScalarParseError::new(s));
            }
            return Ok(p / q);
        }
        let v: f64 = s.parse().map_err(|_| ScalarParseError::new(s))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ScalarParseError::new(s))
        }
    }

    fn from_unit_bits(bits: u64) -> Self {
        bits as f64 * UNIT_SCALE
    }

    fn to_text(&self) -> String {
        format!("{self:?}")
    }

    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn parse_number(s: &str) -> Result<Self, ScalarParseError> {
        parse_rational(s.trim()).ok_or_else(|| ScalarParseError::new(s))
    }

    fn from_unit_bits(bits: u64) -> Self {
        BigRational::new(BigInt::from(bits), BigInt::one() << 53)
    }

    fn to_text(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

/// Nearest-ish f64 of a big rational, robust to numerators and denominators
/// that individually overflow f64.
pub fn rational_to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    // Scale both to ~64 significant bits before dividing.
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    (n / d) * 2f64.powi((shift_n - shift_d) as i32)
}

fn parse_rational(s: &str) -> Option<Rational> {
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_rational(p.trim())?;
        let q = parse_rational(q.trim())?;
        if q.is_zero() {
            return None;
        }
        return Some(p / q);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num::pow(ten, (-scale) as usize))
    };
    Some(if negative { -value } else { value })
}
