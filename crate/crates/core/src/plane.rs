//! Points of the unit square and the two ground metrics on it.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rat::Rat;

/// A point of the closed unit square `[0,1]²`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Point2 {
    pub x: Rat,
    pub y: Rat,
}

impl Point2 {
    pub fn new(x: Rat, y: Rat) -> Result<Point2> {
        for c in [x, y] {
            if !c.in_unit() {
                return Err(Error::OutOfRange(c.to_string()));
            }
        }
        Ok(Point2 { x, y })
    }

    /// Constructor for callers that already know the coordinates are in range.
    pub(crate) fn raw(x: Rat, y: Rat) -> Point2 {
        debug_assert!(x.in_unit() && y.in_unit(), "({x}, {y}) outside U0");
        Point2 { x, y }
    }

    pub fn origin() -> Point2 {
        Point2 { x: Rat::ZERO, y: Rat::ZERO }
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl fmt::Debug for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `|x - x'| + |y - y'|`.
pub fn taxicab(p: &Point2, q: &Point2) -> Rat {
    (p.x - q.x).abs() + (p.y - q.y).abs()
}

/// Squared Euclidean distance. Comparisons against it stay rational.
pub fn euclid_sq(p: &Point2, q: &Point2) -> Rat {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    dx * dx + dy * dy
}

/// Outcome of checking one pair against the constant-2 bilipschitz band.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BandCheck {
    pub p: Point2,
    pub q: Point2,
    pub taxi: Rat,
    pub euclid_sq: Rat,
    pub passed: bool,
}

/// Checks `d_taxi² ≤ 4·d_euc²` and `d_euc² ≤ 4·d_taxi²` for every pair.
pub fn verify_taxi_euclid_bilipschitz(pairs: &[(Point2, Point2)]) -> Vec<BandCheck> {
    let four = Rat::int(4);
    pairs
        .iter()
        .map(|(p, q)| {
            let taxi = taxicab(p, q);
            let e2 = euclid_sq(p, q);
            let t2 = taxi * taxi;
            BandCheck {
                p: *p,
                q: *q,
                taxi,
                euclid_sq: e2,
                passed: t2 <= four * e2 && e2 <= four * t2,
            }
        })
        .collect()
}
