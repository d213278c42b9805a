//! Exact rationals over checked 128-bit integers.
//!
//! Every scalar in the crate is a [`Rat`]. The arithmetic operators panic on
//! overflow instead of wrapping; the `checked_*` methods return
//! [`Error::Overflow`] for callers that want to recover.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};

use crate::error::{Error, Result};

/// An exact rational number in lowest terms with a positive denominator.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rat(Ratio<i128>);

impl Rat {
    pub const ZERO: Rat = Rat(Ratio::new_raw(0, 1));
    pub const ONE: Rat = Rat(Ratio::new_raw(1, 1));
    pub const TWO: Rat = Rat(Ratio::new_raw(2, 1));
    pub const THIRD: Rat = Rat(Ratio::new_raw(1, 3));

    /// Builds `numer / denom`, reducing to lowest terms.
    ///
    /// Panics if `denom` is zero.
    pub fn new(numer: i128, denom: i128) -> Rat {
        Rat::try_new(numer, denom).expect("zero denominator")
    }

    pub fn try_new(numer: i128, denom: i128) -> Result<Rat> {
        if denom == 0 {
            return Err(Error::ZeroDenominator);
        }
        if numer == i128::MIN || denom == i128::MIN {
            return Err(Error::Overflow);
        }
        Ok(Rat(Ratio::new(numer, denom)))
    }

    pub fn int(n: i128) -> Rat {
        Rat(Ratio::from_integer(n))
    }

    /// `3^-k`.
    pub fn third_pow(k: u32) -> Rat {
        Rat(Ratio::new_raw(1, pow3(k)))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(self) -> Rat {
        Rat(self.0.abs())
    }

    pub fn min(self, other: Rat) -> Rat {
        if other < self { other } else { self }
    }

    pub fn max(self, other: Rat) -> Rat {
        if other > self { other } else { self }
    }

    /// Whether the value lies in the closed unit interval.
    pub fn in_unit(&self) -> bool {
        *self >= Rat::ZERO && *self <= Rat::ONE
    }

    /// Exponent `e` when the denominator is exactly `3^e`.
    pub fn ternary_exponent(&self) -> Option<u32> {
        let mut d = self.denom();
        let mut e = 0;
        while d % 3 == 0 {
            d /= 3;
            e += 1;
        }
        (d == 1).then_some(e)
    }

    pub fn is_ternary(&self) -> bool {
        self.ternary_exponent().is_some()
    }

    pub fn floor(self) -> i128 {
        self.0.floor().to_integer()
    }

    pub fn to_f64(self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn checked_add(self, rhs: Rat) -> Result<Rat> {
        self.0.checked_add(&rhs.0).map(Rat).ok_or(Error::Overflow)
    }

    pub fn checked_sub(self, rhs: Rat) -> Result<Rat> {
        self.0.checked_sub(&rhs.0).map(Rat).ok_or(Error::Overflow)
    }

    pub fn checked_mul(self, rhs: Rat) -> Result<Rat> {
        self.0.checked_mul(&rhs.0).map(Rat).ok_or(Error::Overflow)
    }

    pub fn checked_div(self, rhs: Rat) -> Result<Rat> {
        if rhs.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        self.0.checked_div(&rhs.0).map(Rat).ok_or(Error::Overflow)
    }

    pub fn checked_pow(self, exp: u32) -> Result<Rat> {
        let mut acc = Rat::ONE;
        for _ in 0..exp {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    pub fn pow(self, exp: u32) -> Rat {
        self.checked_pow(exp).expect("rational overflow")
    }
}

/// `3^k` as an integer. Panics past `3^80`.
pub fn pow3(k: u32) -> i128 {
    3i128.checked_pow(k).expect("power of three overflows i128")
}

impl Ord for Rat {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

macro_rules! checked_op {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                self.$checked(rhs).expect("rational overflow")
            }
        }
    };
}

checked_op!(Add, add, checked_add);
checked_op!(Sub, sub, checked_sub);
checked_op!(Mul, mul, checked_mul);
checked_op!(Div, div, checked_div);

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        *self = *self + rhs;
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::ZERO, |a, b| a + b)
    }
}

impl From<i128> for Rat {
    fn from(n: i128) -> Rat {
        Rat::int(n)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rat {
    type Err = Error;

    /// Accepts `n` or `n/d` with optional sign and surrounding whitespace.
    fn from_str(s: &str) -> Result<Rat> {
        let s = s.trim();
        let bad = || Error::parse(0, format!("invalid rational `{s}`"));
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: i128 = n.parse().map_err(|_| bad())?;
        let d: i128 = d.parse().map_err(|_| bad())?;
        Rat::try_new(n, d)
    }
}

impl serde::Serialize for Rat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
