//! Eventually periodic base-3 expansions of rationals in `[0,1]`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rat::Rat;

/// Which expansion to produce for a ternary rational, which has two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Expansion {
    /// Ends in repeating zeros.
    Low,
    /// Ends in repeating twos.
    High,
}

/// The digit stream `preperiod · period^ω`, read as `Σ d_k 3^-(k+1)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TernaryStream {
    preperiod: Vec<u8>,
    period: Vec<u8>,
}

impl TernaryStream {
    pub fn new(preperiod: Vec<u8>, period: Vec<u8>) -> Result<TernaryStream> {
        if period.is_empty() {
            return Err(Error::parse(0, "empty period"));
        }
        if preperiod.iter().chain(&period).any(|&d| d > 2) {
            return Err(Error::parse(0, "ternary digits must be 0, 1 or 2"));
        }
        Ok(TernaryStream { preperiod, period })
    }

    pub fn preperiod(&self) -> &[u8] {
        &self.preperiod
    }

    pub fn period(&self) -> &[u8] {
        &self.period
    }

    /// Digit at position `k` (0-based, weight `3^-(k+1)`).
    pub fn digit(&self, k: usize) -> u8 {
        if k < self.preperiod.len() {
            self.preperiod[k]
        } else {
            self.period[(k - self.preperiod.len()) % self.period.len()]
        }
    }
}

impl fmt::Debug for TernaryStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = |ds: &[u8]| ds.iter().map(|d| char::from(b'0' + d)).collect::<String>();
        write!(f, "0.{}({})", digits(&self.preperiod), digits(&self.period))
    }
}

/// Expands `x ∈ [0,1]` in base 3.
///
/// Ternary rationals strictly between 0 and 1 have two expansions and
/// `variant` picks one; every other input has exactly one.
pub fn to_ternary(x: Rat, variant: Expansion) -> Result<TernaryStream> {
    if !x.in_unit() {
        return Err(Error::OutOfRange(x.to_string()));
    }
    if x == Rat::ONE {
        return TernaryStream::new(vec![], vec![2]);
    }
    if x.is_zero() {
        return TernaryStream::new(vec![], vec![0]);
    }
    match x.ternary_exponent() {
        Some(e) => Ok(ternary_rational(x.numer(), e, variant)),
        None => Ok(long_division(x.numer(), x.denom())),
    }
}

/// `n / 3^e` with `0 < n < 3^e` and `3 ∤ n`.
fn ternary_rational(n: i128, e: u32, variant: Expansion) -> TernaryStream {
    let mut digits = vec![0u8; e as usize];
    let mut rest = n;
    for slot in digits.iter_mut().rev() {
        *slot = (rest % 3) as u8;
        rest /= 3;
    }
    match variant {
        Expansion::Low => TernaryStream { preperiod: digits, period: vec![0] },
        Expansion::High => {
            // 3 ∤ n, so the last digit is nonzero.
            *digits.last_mut().unwrap() -= 1;
            TernaryStream { preperiod: digits, period: vec![2] }
        }
    }
}

fn long_division(n: i128, d: i128) -> TernaryStream {
    let mut seen: HashMap<i128, usize> = HashMap::new();
    let mut digits = Vec::new();
    let mut rem = n;
    loop {
        if let Some(&start) = seen.get(&rem) {
            let period = digits.split_off(start);
            return TernaryStream { preperiod: digits, period };
        }
        seen.insert(rem, digits.len());
        let scaled = rem * 3;
        digits.push((scaled / d) as u8);
        rem = scaled % d;
    }
}

/// Exact value of a stream: partial sum of the preperiod plus the geometric
/// series of the repeating block.
///
/// Long periods are summed in arbitrary precision; the reduced result must
/// still fit a [`Rat`], otherwise this panics with "rational overflow".
pub fn eval_ternary(s: &TernaryStream) -> Rat {
    let as_int = |ds: &[u8]| {
        ds.iter()
            .fold(BigInt::zero(), |acc, &d| acc * 3 + BigInt::from(d))
    };
    let three = BigInt::from(3);
    let pre_scale = three.pow(s.preperiod.len() as u32);
    let head = BigRational::new(as_int(&s.preperiod), pre_scale.clone());
    let tail = BigRational::new(
        as_int(&s.period),
        three.pow(s.period.len() as u32) - BigInt::one(),
    );
    let value = head + tail / BigRational::from_integer(pre_scale);
    let numer = value.numer().to_i128().expect("rational overflow");
    let denom = value.denom().to_i128().expect("rational overflow");
    Rat::new(numer, denom)
}
