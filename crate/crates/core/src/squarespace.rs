//! The boundary square `M₀`, its path metric, and executable checks of the
//! two square-space axioms.
//!
//! A square metric space is a metric space `X` bounded by 2 together with an
//! embedding `S: M₀ → X` of the square's boundary such that
//!
//! * **sq1**: along any one side, `d(S(p), S(q))` equals the distance of the
//!   side parameters in `[0,1]`;
//! * **sq2**: for any two boundary points, `d(S(p), S(q))` is at least their
//!   taxicab distance in the plane.
//!
//! The validators below sample ternary-rational side parameters at a chosen
//! depth and report every violating pair.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gluing::Cell;
use crate::plane::{taxicab, Point2};
use crate::rat::{pow3, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    /// `(0, t)`
    Left,
    /// `(1, t)`
    Right,
    /// `(t, 0)`
    Bottom,
    /// `(t, 1)`
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn point(self, t: Rat) -> BoundaryPoint {
        debug_assert!(t.in_unit());
        let (x, y) = match self {
            Side::Left => (Rat::ZERO, t),
            Side::Right => (Rat::ONE, t),
            Side::Bottom => (t, Rat::ZERO),
            Side::Top => (t, Rat::ONE),
        };
        BoundaryPoint { x, y }
    }
}

/// A point on the boundary of the unit square.
///
/// Stored by its plane coordinates, so a corner has exactly one
/// representation no matter which side it is reached from.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BoundaryPoint {
    x: Rat,
    y: Rat,
}

impl BoundaryPoint {
    pub fn new(x: Rat, y: Rat) -> Result<BoundaryPoint> {
        let edge = |c: Rat| c.is_zero() || c == Rat::ONE;
        if !(x.in_unit() && y.in_unit() && (edge(x) || edge(y))) {
            return Err(Error::NotOnBoundary { x: x.to_string(), y: y.to_string() });
        }
        Ok(BoundaryPoint { x, y })
    }

    /// One of the four corners; `r` and `s` must be 0 or 1.
    pub fn corner(r: u8, s: u8) -> BoundaryPoint {
        assert!(r <= 1 && s <= 1, "corner coordinates must be 0 or 1");
        BoundaryPoint { x: Rat::int(r as i128), y: Rat::int(s as i128) }
    }

    pub fn x(&self) -> Rat {
        self.x
    }

    pub fn y(&self) -> Rat {
        self.y
    }

    pub fn point(&self) -> Point2 {
        Point2::raw(self.x, self.y)
    }

    /// `Some((r, s))` when the point is a corner.
    pub fn as_corner(&self) -> Option<(u8, u8)> {
        let bit = |c: Rat| match c {
            c if c.is_zero() => Some(0),
            c if c == Rat::ONE => Some(1),
            _ => None,
        };
        Some((bit(self.x)?, bit(self.y)?))
    }

    /// The sides containing the point with its parameter on each; two for a
    /// corner, one otherwise.
    pub fn sides(&self) -> impl Iterator<Item = (Side, Rat)> + '_ {
        Side::ALL.into_iter().filter_map(move |side| {
            let (fixed, t, want) = match side {
                Side::Left => (self.x, self.y, Rat::ZERO),
                Side::Right => (self.x, self.y, Rat::ONE),
                Side::Bottom => (self.y, self.x, Rat::ZERO),
                Side::Top => (self.y, self.x, Rat::ONE),
            };
            (fixed == want).then_some((side, t))
        })
    }

    /// Arc-length position along the perimeter, counter-clockwise from the
    /// origin, in `[0, 4)`.
    fn perimeter_position(&self) -> Rat {
        if self.y.is_zero() {
            self.x
        } else if self.x == Rat::ONE {
            Rat::ONE + self.y
        } else if self.y == Rat::ONE {
            Rat::int(3) - self.x
        } else {
            Rat::int(4) - self.y
        }
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl fmt::Debug for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for BoundaryPoint {
    type Err = Error;

    /// Parses `(r,s)`.
    fn from_str(s: &str) -> Result<BoundaryPoint> {
        let t = s.trim();
        let inner = t
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::parse(0, format!("expected `(r,s)`, found `{t}`")))?;
        let (x, y) = inner
            .split_once(',')
            .ok_or_else(|| Error::parse(1, "expected a comma between coordinates"))?;
        BoundaryPoint::new(x.parse()?, y.parse()?)
    }
}

/// Path metric of `M₀`: the shorter way around the perimeter.
pub fn path_metric_m0(a: &BoundaryPoint, b: &BoundaryPoint) -> Rat {
    let gap = (a.perimeter_position() - b.perimeter_position()).abs();
    gap.min(Rat::int(4) - gap)
}

/// The embedding `S_{M⊗X}` expressed one level down: returns the least
/// `(cell, q)` with `S_{M⊗X}(p) = cell ⊗ S_X(q)`.
///
/// Each side is cut into thirds; the parameter is rescaled by 3 into the
/// matching cell on that side. At the cut points and at corners several
/// cells qualify and the lexicographically least wins. The same map serves
/// both the `M` and `N` constructions since the centre cell never touches
/// the outer boundary.
pub fn side_embedding(p: &BoundaryPoint) -> (Cell, BoundaryPoint) {
    let three = Rat::int(3);
    p.sides()
        .flat_map(|(side, t)| {
            (0u8..3).filter_map(move |piece| {
                let local = three * t - Rat::int(piece as i128);
                if !local.in_unit() {
                    return None;
                }
                let cell = match side {
                    Side::Left => Cell::new(0, piece),
                    Side::Right => Cell::new(2, piece),
                    Side::Bottom => Cell::new(piece, 0),
                    Side::Top => Cell::new(piece, 2),
                };
                Some((cell, side.point(local)))
            })
        })
        .min()
        .expect("a boundary point lies on at least one side")
}

/// A metric space with a distinguished boundary embedding. The axioms are
/// not assumed; the validators check them.
pub trait SquareMetric {
    type Point;

    fn embed(&self, p: &BoundaryPoint) -> Self::Point;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> Rat;
}

/// `M₀` with its path metric; the embedding is the identity.
#[derive(Clone, Copy, Debug, Default)]
pub struct PathMetricM0;

impl SquareMetric for PathMetricM0 {
    type Point = BoundaryPoint;

    fn embed(&self, p: &BoundaryPoint) -> BoundaryPoint {
        *p
    }

    fn distance(&self, a: &BoundaryPoint, b: &BoundaryPoint) -> Rat {
        path_metric_m0(a, b)
    }
}

/// The unit square with the taxicab metric and the inclusion of its boundary.
#[derive(Clone, Copy, Debug, Default)]
pub struct TaxicabSquare;

impl SquareMetric for TaxicabSquare {
    type Point = Point2;

    fn embed(&self, p: &BoundaryPoint) -> Point2 {
        p.point()
    }

    fn distance(&self, a: &Point2, b: &Point2) -> Rat {
        taxicab(a, b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub a: BoundaryPoint,
    pub b: BoundaryPoint,
    pub expected: Rat,
    pub observed: Rat,
}

/// Result of an axiom sweep. Only the first few violations are kept.
#[derive(Clone, Debug, Default, Serialize)]
pub struct AxiomReport {
    pub pairs_checked: usize,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

const KEPT_VIOLATIONS: usize = 16;

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    fn record(&mut self, v: Option<Violation>) {
        self.pairs_checked += 1;
        if let Some(v) = v {
            self.violation_count += 1;
            if self.violations.len() < KEPT_VIOLATIONS {
                self.violations.push(v);
            }
        }
    }
}

/// Boundary points whose side parameters are multiples of `3^-depth`, each
/// listed once, counter-clockwise from the origin.
pub fn boundary_grid(depth: u32) -> Vec<BoundaryPoint> {
    let n = pow3(depth);
    let mut pts: Vec<BoundaryPoint> = Side::ALL
        .into_iter()
        .flat_map(|side| (0..=n).map(move |i| side.point(Rat::new(i, n))))
        .collect();
    pts.sort_by_key(|p| p.perimeter_position());
    pts.dedup();
    pts
}

/// Axiom sq1 on every side at parameters `i / 3^depth`.
pub fn validate_sq1<S: SquareMetric>(m: &S, depth: u32) -> AxiomReport {
    assert!(depth >= 1, "grid depth must be at least 1");
    let n = pow3(depth);
    let mut report = AxiomReport::default();
    for side in Side::ALL {
        let pts: Vec<_> = (0..=n)
            .map(|i| {
                let t = Rat::new(i, n);
                let bp = side.point(t);
                (t, bp, m.embed(&bp))
            })
            .collect();
        for (i, (r, a, ea)) in pts.iter().enumerate() {
            for (s, b, eb) in &pts[i + 1..] {
                let expected = (*r - *s).abs();
                let observed = m.distance(ea, eb);
                report.record((observed != expected).then_some(Violation {
                    a: *a,
                    b: *b,
                    expected,
                    observed,
                }));
            }
        }
    }
    report
}

/// Axiom sq2 over all pairs of the depth grid on the boundary.
pub fn validate_sq2<S: SquareMetric>(m: &S, depth: u32) -> AxiomReport {
    assert!(depth >= 1, "grid depth must be at least 1");
    let pts: Vec<_> = boundary_grid(depth)
        .into_iter()
        .map(|bp| (bp, m.embed(&bp)))
        .collect();
    let mut report = AxiomReport::default();
    for (i, (a, ea)) in pts.iter().enumerate() {
        for (b, eb) in &pts[i + 1..] {
            let expected = taxicab(&a.point(), &b.point());
            let observed = m.distance(ea, eb);
            report.record((observed < expected).then_some(Violation {
                a: *a,
                b: *b,
                expected,
                observed,
            }));
        }
    }
    report
}
