//! The carpet's iterated function system on unions of ternary cells.
//!
//! `σ_m(A) = shrink(m) + A/3` for the eight cells `m` of `M`, and
//! `σ(A) = ∪ σ_m(A)`. A [`CellSet`] is a union of closed level-`p` cells named
//! by their digit words, which `σ` maps to a union of level-`p+1` cells by
//! prefixing each word with every `m`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gluing::{alpha, word_to_grid, Cell, Variant};
use crate::lattice::LatticeGraph;
use crate::plane::{taxicab, Point2};
use crate::rat::{pow3, Rat};

/// Cap on cells produced by [`iterate`].
pub const DEFAULT_MAX_CELLS: usize = 1 << 21;

/// Finest sampling level accepted by the Hausdorff bounds (a `3^q + 1`
/// square grid of distances is held in memory).
pub const MAX_SAMPLE_LEVEL: u32 = 7;

/// A nonempty union of closed level-`p` cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSet {
    level: u32,
    cells: BTreeSet<Vec<Cell>>,
}

impl CellSet {
    /// `U₀` itself: the single empty word at level 0.
    pub fn unit() -> CellSet {
        CellSet { level: 0, cells: BTreeSet::from([Vec::new()]) }
    }

    pub fn new(level: u32, cells: impl IntoIterator<Item = Vec<Cell>>) -> Result<CellSet> {
        let cells: BTreeSet<_> = cells.into_iter().collect();
        if cells.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(w) = cells.iter().find(|w| w.len() != level as usize) {
            return Err(Error::Invalid(format!(
                "word of length {} in a level-{level} cell set",
                w.len()
            )));
        }
        Ok(CellSet { level, cells })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn cells(&self) -> &BTreeSet<Vec<Cell>> {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Grid coordinates of the cells at level `q ≥ level`, each cell split
    /// into its `9^(q-level)` subcells.
    pub fn grid_cells(&self, q: u32) -> Vec<(u64, u64)> {
        assert!(q >= self.level);
        let m = pow3(q - self.level) as u64;
        let mut out = Vec::with_capacity(self.cells.len() * (m * m) as usize);
        for w in &self.cells {
            let (x, y) = word_to_grid(w);
            for dy in 0..m {
                for dx in 0..m {
                    out.push((x * m + dx, y * m + dy));
                }
            }
        }
        out
    }

    /// Whether every point of `self` lies in `other`, compared at the finer level.
    pub fn is_subset(&self, other: &CellSet) -> bool {
        let q = self.level.max(other.level);
        let theirs: BTreeSet<_> = other.grid_cells(q).into_iter().collect();
        self.grid_cells(q).iter().all(|c| theirs.contains(c))
    }

    /// Writes `level <p>` then one word per line as space-separated digit
    /// pairs (`02 21`); the empty word is `-`.
    pub fn to_text(&self) -> String {
        let mut s = format!("level {}\n", self.level);
        for w in &self.cells {
            if w.is_empty() {
                s.push('-');
            }
            for (n, c) in w.iter().enumerate() {
                if n > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{}{}", c.i, c.j);
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<CellSet> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hn, header) = lines.next().ok_or_else(|| Error::line(1, "missing `level` header"))?;
        let level: u32 = header
            .strip_prefix("level")
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| Error::line(hn, "expected `level <p>`"))?;
        let mut cells = Vec::new();
        for (n, line) in lines {
            let word: Vec<Cell> = if line == "-" {
                Vec::new()
            } else {
                line.split_whitespace()
                    .map(|tok| match tok.as_bytes() {
                        [a @ b'0'..=b'2', b @ b'0'..=b'2'] => Ok(Cell::new(a - b'0', b - b'0')),
                        _ => Err(Error::line(n, format!("bad digit pair `{tok}`"))),
                    })
                    .collect::<Result<_>>()?
            };
            if word.len() != level as usize {
                return Err(Error::line(n, format!("expected {level} digit pairs")));
            }
            cells.push(word);
        }
        CellSet::new(level, cells).map_err(|e| Error::line(hn, e.to_string()))
    }
}

/// `σ(A)`: every word prefixed with every cell of `M`.
pub fn sigma_step(a: &CellSet) -> CellSet {
    let cells = Variant::M
        .cells()
        .flat_map(|m| {
            a.cells.iter().map(move |w| {
                let mut v = Vec::with_capacity(w.len() + 1);
                v.push(m);
                v.extend_from_slice(w);
                v
            })
        })
        .collect();
    CellSet { level: a.level + 1, cells }
}

/// `σ^p(A)`, refusing outputs above `max_cells`.
pub fn iterate(a: &CellSet, p: u32, max_cells: usize) -> Result<CellSet> {
    let projected = 8f64.powi(p as i32) * a.len() as f64;
    if projected > max_cells as f64 {
        return Err(Error::TooLarge(format!(
            "σ^{p} of {} cells would produce {projected} cells (limit {max_cells})",
            a.len()
        )));
    }
    let mut cur = a.clone();
    for _ in 0..p {
        cur = sigma_step(&cur);
    }
    Ok(cur)
}

/// The closed cell `A_w` as its lower-left and upper-right corners.
pub fn cell_bounds(word: &[Cell]) -> (Point2, Point2) {
    let place = |corner: Point2| word.iter().rev().fold(corner, |z, c| alpha(*c, &z));
    let one = Point2::new(Rat::ONE, Rat::ONE).unwrap();
    (place(Point2::origin()), place(one))
}

/// Taxicab diameter of `A_w`, which is `2·3^-|w|`.
pub fn cell_diameter(word: &[Cell]) -> Rat {
    let (lo, hi) = cell_bounds(word);
    taxicab(&lo, &hi)
}

/// Certified bracket for a Hausdorff distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HausdorffBounds {
    pub lower: Rat,
    pub upper: Rat,
    pub sample_level: u32,
}

/// Corner marks of the cells at level `q` on a `(3^q+1)²` grid.
fn vertex_marks(set: &CellSet, q: u32) -> Vec<bool> {
    let w = pow3(q) as usize + 1;
    let mut marks = vec![false; w * w];
    for (x, y) in set.grid_cells(q) {
        let (x, y) = (x as usize, y as usize);
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            marks[(y + dy) * w + x + dx] = true;
        }
    }
    marks
}

/// Exact city-block distance from every grid vertex to the nearest marked
/// one, by the two-pass chamfer transform.
fn l1_distance_field(marks: &[bool], w: usize) -> Vec<u32> {
    const FAR: u32 = u32::MAX / 2;
    let mut d: Vec<u32> = marks.iter().map(|&m| if m { 0 } else { FAR }).collect();
    for y in 0..w {
        for x in 0..w {
            let i = y * w + x;
            if x > 0 {
                d[i] = d[i].min(d[i - 1] + 1);
            }
            if y > 0 {
                d[i] = d[i].min(d[i - w] + 1);
            }
        }
    }
    for y in (0..w).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            if x + 1 < w {
                d[i] = d[i].min(d[i + 1] + 1);
            }
            if y + 1 < w {
                d[i] = d[i].min(d[i + w] + 1);
            }
        }
    }
    d
}

/// Largest field value over the marked vertices.
fn directed_sup(field: &[u32], marks: &[bool]) -> u32 {
    field
        .iter()
        .zip(marks)
        .filter(|(_, m)| **m)
        .map(|(d, _)| *d)
        .max()
        .unwrap_or(0)
}

/// Hausdorff distance under the taxicab metric, bracketed by sampling both
/// sets at the corners of their level-`q` subcells.
///
/// For a grid vertex the distance to a union of grid cells is attained at a
/// grid vertex, so each sampled distance is exact and the sampled supremum is
/// a lower bound. Every point of a cell is within `3^-q` of one of its
/// corners, and the upper bound adds `2·3^-q` to cover it.
pub fn hausdorff_taxi(a: &CellSet, b: &CellSet, q: u32) -> Result<HausdorffBounds> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let q = q.max(a.level).max(b.level);
    if q > MAX_SAMPLE_LEVEL {
        return Err(Error::LevelTooDeep { requested: q, max: MAX_SAMPLE_LEVEL });
    }
    let w = pow3(q) as usize + 1;
    let (ma, mb) = (vertex_marks(a, q), vertex_marks(b, q));
    let to_b = l1_distance_field(&mb, w);
    let to_a = l1_distance_field(&ma, w);
    let sup = directed_sup(&to_b, &ma).max(directed_sup(&to_a, &mb));
    let unit = Rat::third_pow(q);
    let lower = Rat::int(sup as i128) * unit;
    Ok(HausdorffBounds { lower, upper: lower + Rat::TWO * unit, sample_level: q })
}

/// Sampled Hausdorff suprema under both metrics, in lattice units at level `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MetricPairSample {
    pub taxi: u64,
    pub euclid_sq: u64,
}

impl MetricPairSample {
    /// `d_Ht/2 ≤ d_He ≤ 2·d_Ht`, squared.
    pub fn within_band(&self) -> bool {
        let t2 = self.taxi * self.taxi;
        t2 <= 4 * self.euclid_sq && self.euclid_sq <= 4 * t2
    }
}

/// Brute-force sampled Hausdorff suprema of two small cell sets under the
/// taxicab and Euclidean metrics, over the same level-`q` corner samples.
pub fn sampled_hausdorff_pair(a: &CellSet, b: &CellSet, q: u32) -> Result<MetricPairSample> {
    let q = q.max(a.level).max(b.level);
    if q > 4 {
        return Err(Error::LevelTooDeep { requested: q, max: 4 });
    }
    let w = pow3(q) as usize + 1;
    let verts = |m: Vec<bool>| -> Vec<(i64, i64)> {
        (0..m.len()).filter(|&i| m[i]).map(|i| ((i % w) as i64, (i / w) as i64)).collect()
    };
    let (va, vb) = (verts(vertex_marks(a, q)), verts(vertex_marks(b, q)));
    let directed = |from: &[(i64, i64)], to: &[(i64, i64)]| {
        from.iter().fold((0u64, 0u64), |(t, e), p| {
            let nt = to.iter().map(|r| (p.0 - r.0).unsigned_abs() + (p.1 - r.1).unsigned_abs()).min();
            let ne = to
                .iter()
                .map(|r| ((p.0 - r.0).pow(2) + (p.1 - r.1).pow(2)) as u64)
                .min();
            (t.max(nt.unwrap()), e.max(ne.unwrap()))
        })
    };
    let (t1, e1) = directed(&va, &vb);
    let (t2, e2) = directed(&vb, &va);
    Ok(MetricPairSample { taxi: t1.max(t2), euclid_sq: e1.max(e2) })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FixedPointReport {
    pub level: u32,
    /// `σ(σ^p(U₀)) = σ^(p+1)(U₀)`.
    pub sigma_consistent: bool,
    /// `σ^p(U₀)` is exactly the set of kept lattice cells at level `p`.
    pub matches_lattice: bool,
    pub cells: usize,
}

impl FixedPointReport {
    pub fn passed(&self) -> bool {
        self.sigma_consistent && self.matches_lattice
    }
}

pub fn fixed_point_check(p: u32, k_max: u32) -> Result<FixedPointReport> {
    let here = iterate(&CellSet::unit(), p, DEFAULT_MAX_CELLS)?;
    let next = iterate(&CellSet::unit(), p + 1, DEFAULT_MAX_CELLS)?;
    let lattice = LatticeGraph::build(p, Variant::M, k_max)?;
    let mine: BTreeSet<(u64, u64)> = here.cells.iter().map(|w| word_to_grid(w)).collect();
    let theirs: BTreeSet<(u64, u64)> =
        lattice.kept_cells().map(|(x, y)| (x as u64, y as u64)).collect();
    Ok(FixedPointReport {
        level: p,
        sigma_consistent: sigma_step(&here) == next,
        matches_lattice: mine == theirs,
        cells: here.len(),
    })
}
