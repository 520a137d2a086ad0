//! Exact numbers of the form `a + b√2` with rational `a`, `b`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::{Signed, Zero};

use crate::scalar::{rational_to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtendedRational {
    pub a: Rational,
    pub b: Rational,
}

impl ExtendedRational {
    pub fn new(a: Rational, b: Rational) -> Self {
        Self { a, b }
    }

    pub fn rational(a: Rational) -> Self {
        Self { a, b: Rational::zero() }
    }

    pub fn zero() -> Self {
        Self::rational(Rational::zero())
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i8 {
        let sa = sign(&self.a);
        let sb = sign(&self.b);
        if sa == sb || sb == 0 {
            return sa;
        }
        if sa == 0 {
            return sb;
        }
        // opposite signs: the larger of |a| and |b|√2 wins
        let a2 = &self.a * &self.a;
        let b2 = &self.b * &self.b * Rational::from_integer(2.into());
        match a2.cmp(&b2) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self { a: &self.a * c, b: &self.b * c }
    }

    /// `(1 - α) x + α t` in one fused step. The result is left unreduced:
    /// gcd reduction of large operands costs more than the extra bits it
    /// saves. Denominators must be positive.
    pub fn lerp(&self, alpha: &Rational, target: &Rational) -> Self {
        let (p, m) = (alpha.numer(), alpha.denom());
        let keep = m - p;
        let (n, d) = (self.a.numer(), self.a.denom());
        let (tn, td) = (target.numer(), target.denom());
        let a = Rational::new_raw(&keep * n * td + p * tn * d, m * d * td);
        let b = if self.b.is_zero() {
            Rational::zero()
        } else {
            Rational::new_raw(&keep * self.b.numer(), m * self.b.denom())
        };
        Self { a, b }
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.a) + rational_to_f64(&self.b) * std::f64::consts::SQRT_2
    }
}

fn sign(r: &Rational) -> i8 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

impl From<Rational> for ExtendedRational {
    fn from(a: Rational) -> Self {
        Self::rational(a)
    }
}

impl Add for ExtendedRational {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { a: self.a + o.a, b: self.b + o.b }
    }
}

impl Sub for ExtendedRational {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { a: self.a - o.a, b: self.b - o.b }
    }
}

impl Neg for ExtendedRational {
    type Output = Self;
    fn neg(self) -> Self {
        Self { a: -self.a, b: -self.b }
    }
}

impl Mul for ExtendedRational {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let two = Rational::from_integer(2.into());
        Self {
            a: &self.a * &o.a + two * &self.b * &o.b,
            b: &self.a * &o.b + &self.b * &o.a,
        }
    }
}

impl Mul<&Rational> for ExtendedRational {
    type Output = Self;
    fn mul(self, c: &Rational) -> Self {
        self.scale(c)
    }
}

impl PartialOrd for ExtendedRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Relative error budget of the float filter in [`Ord::cmp`]; each
/// conversion is within a few ulps, so 1e-12 leaves a wide margin.
const FILTER_TOL: f64 = 1e-12;

impl Ord for ExtendedRational {
    fn cmp(&self, other: &Self) -> Ordering {
        // cheap float filter, exact comparison only when the gap is tiny
        let (xa, xb) = (rational_to_f64(&self.a), rational_to_f64(&self.b));
        let (ya, yb) = (rational_to_f64(&other.a), rational_to_f64(&other.b));
        let sqrt2 = std::f64::consts::SQRT_2;
        let gap = (xa - ya) + (xb - yb) * sqrt2;
        let scale = xa.abs() + ya.abs() + (xb.abs() + yb.abs()) * sqrt2;
        if gap.is_finite() && scale.is_finite() && scale > f64::MIN_POSITIVE && gap.abs() > FILTER_TOL * scale {
            return gap.partial_cmp(&0.0).expect("finite");
        }
        (self.clone() - other.clone()).signum().cmp(&0)
    }
}

impl PartialEq<Rational> for ExtendedRational {
    fn eq(&self, other: &Rational) -> bool {
        self.b.is_zero() && self.a == *other
    }
}

impl PartialOrd<Rational> for ExtendedRational {
    fn partial_cmp(&self, other: &Rational) -> Option<Ordering> {
        Some(self.cmp(&Self::rational(other.clone())))
    }
}

impl fmt::Display for ExtendedRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_zero() {
            write!(f, "{}", self.a)
        } else {
            write!(f, "{} + {}·√2", self.a, self.b)
        }
    }
}
