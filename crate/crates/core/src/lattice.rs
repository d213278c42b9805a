//! Level-`k` lattice graphs and exact geodesic distances between corner points.
//!
//! The 1-skeleton of `M^k⊗M₀` (or `N^k⊗M₀`) is the grid of kept level-`k`
//! cells: vertices are cell corners, edges are cell sides of length `3^-k`.
//! Geodesics between corner points run along corners only, so breadth-first
//! search with unit weights gives the quotient-metric distance exactly once
//! the hop count is scaled by `3^-k`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gluing::{cell_kept, eval, grid_to_word, normalize, word_to_grid, Address, Cell, GlueTable, Variant};
use crate::plane::{taxicab, Point2};
use crate::rat::{pow3, Rat};
use crate::squarespace::{side_embedding, BoundaryPoint, SquareMetric};

pub const DEFAULT_K_MAX: u32 = 6;

const UNREACHED: u32 = u32::MAX;

/// A corner point: a level-`k` word and one of the four corners of its cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CornerAddress {
    variant: Variant,
    word: Vec<Cell>,
    corner: (u8, u8),
}

impl CornerAddress {
    pub fn new(variant: Variant, word: Vec<Cell>, corner: (u8, u8)) -> Result<CornerAddress> {
        if word.iter().any(|c| !variant.allows(*c)) {
            return Err(Error::ForbiddenIndex);
        }
        if corner.0 > 1 || corner.1 > 1 {
            return Err(Error::NotCorner(format!("{corner:?}")));
        }
        Ok(CornerAddress { variant, word, corner })
    }

    pub fn from_address(a: &Address) -> Result<CornerAddress> {
        let corner = a.tip().as_corner().ok_or_else(|| Error::NotCorner(a.tip().to_string()))?;
        CornerAddress::new(a.variant(), a.word().to_vec(), corner)
    }

    pub fn to_address(&self) -> Address {
        let tip = BoundaryPoint::corner(self.corner.0, self.corner.1);
        Address::new(self.variant, self.word.clone(), tip).expect("validated on construction")
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn word(&self) -> &[Cell] {
        &self.word
    }

    pub fn corner(&self) -> (u8, u8) {
        self.corner
    }

    pub fn level(&self) -> u32 {
        self.word.len() as u32
    }

    /// Lattice coordinates in units of `3^-level`.
    pub fn grid(&self) -> (u64, u64) {
        let (x, y) = word_to_grid(&self.word);
        (x + self.corner.0 as u64, y + self.corner.1 as u64)
    }

    pub fn eval(&self) -> Point2 {
        let (x, y) = self.grid();
        let n = pow3(self.level());
        Point2::new(Rat::new(x as i128, n), Rat::new(y as i128, n)).expect("corner lies in U0")
    }

    /// The image `j` levels down the chain: each step appends the cell that has
    /// the same corner at the same place, i.e. `(2r, 2s)` for corner `(r, s)`.
    pub fn refine(&self, j: u32) -> CornerAddress {
        let mut word = self.word.clone();
        let digit = Cell::new(2 * self.corner.0, 2 * self.corner.1);
        word.extend(std::iter::repeat_n(digit, j as usize));
        CornerAddress { variant: self.variant, word, corner: self.corner }
    }
}

/// The 1-skeleton of the kept level-`k` cells.
#[derive(Clone, Debug)]
pub struct LatticeGraph {
    level: u32,
    variant: Variant,
    side: u32,
    kept: Vec<bool>,
    present: Vec<bool>,
    vertex_count: usize,
    edge_count: usize,
}

impl LatticeGraph {
    /// Builds the level-`k` lattice, refusing levels above `k_max`.
    pub fn build(k: u32, variant: Variant, k_max: u32) -> Result<LatticeGraph> {
        if k > k_max {
            return Err(Error::LevelTooDeep { requested: k, max: k_max });
        }
        let side = u32::try_from(pow3(k)).map_err(|_| Error::TooLarge(format!("level {k}")))?;
        let n = side as usize;
        let mut kept = vec![false; n * n];
        for y in 0..side {
            for x in 0..side {
                kept[y as usize * n + x as usize] = cell_kept(variant, x as u64, y as u64, k);
            }
        }
        let mut g = LatticeGraph {
            level: k,
            variant,
            side,
            kept,
            present: vec![false; (n + 1) * (n + 1)],
            vertex_count: 0,
            edge_count: 0,
        };
        for y in 0..side {
            for x in 0..side {
                if g.cell(x, y) {
                    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        let id = g.id(x + dx, y + dy);
                        g.present[id] = true;
                    }
                }
            }
        }
        g.vertex_count = g.present.iter().filter(|p| **p).count();
        let mut edges = 0;
        for y in 0..=side {
            for x in 0..=side {
                edges += usize::from(x < side && g.h_edge(x, y));
                edges += usize::from(y < side && g.v_edge(x, y));
            }
        }
        g.edge_count = edges;
        Ok(g)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Cells per side, `3^k`.
    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn cell(&self, x: u32, y: u32) -> bool {
        self.kept[y as usize * self.side as usize + x as usize]
    }

    /// Row-major vertex index.
    pub fn id(&self, x: u32, y: u32) -> usize {
        y as usize * (self.side as usize + 1) + x as usize
    }

    pub fn coords(&self, id: usize) -> (u32, u32) {
        let w = self.side as usize + 1;
        ((id % w) as u32, (id / w) as u32)
    }

    pub fn has_vertex(&self, x: u32, y: u32) -> bool {
        x <= self.side && y <= self.side && self.present[self.id(x, y)]
    }

    /// Vertex indices in row-major order.
    pub fn vertices(&self) -> Vec<usize> {
        (0..self.present.len()).filter(|&i| self.present[i]).collect()
    }

    /// Kept cells as grid coordinates, row-major.
    pub fn kept_cells(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let side = self.side;
        (0..side)
            .flat_map(move |y| (0..side).map(move |x| (x, y)))
            .filter(|&(x, y)| self.cell(x, y))
    }

    /// Segment `(x,y)–(x+1,y)`.
    fn h_edge(&self, x: u32, y: u32) -> bool {
        (y < self.side && self.cell(x, y)) || (y > 0 && self.cell(x, y - 1))
    }

    /// Segment `(x,y)–(x,y+1)`.
    fn v_edge(&self, x: u32, y: u32) -> bool {
        (x < self.side && self.cell(x, y)) || (x > 0 && self.cell(x - 1, y))
    }

    /// Every edge once, horizontal edges first, each family row-major.
    pub fn edges(&self) -> impl Iterator<Item = ((u32, u32), (u32, u32))> + '_ {
        let n = self.side;
        let h = (0..=n)
            .flat_map(move |y| (0..n).map(move |x| (x, y)))
            .filter(|&(x, y)| self.h_edge(x, y))
            .map(|(x, y)| ((x, y), (x + 1, y)));
        let v = (0..n)
            .flat_map(move |y| (0..=n).map(move |x| (x, y)))
            .filter(|&(x, y)| self.v_edge(x, y))
            .map(|(x, y)| ((x, y), (x, y + 1)));
        h.chain(v)
    }

    fn for_each_neighbour(&self, id: usize, mut f: impl FnMut(usize)) {
        let (x, y) = self.coords(id);
        let w = self.side as usize + 1;
        if x < self.side && self.h_edge(x, y) {
            f(id + 1);
        }
        if x > 0 && self.h_edge(x - 1, y) {
            f(id - 1);
        }
        if y < self.side && self.v_edge(x, y) {
            f(id + w);
        }
        if y > 0 && self.v_edge(x, y - 1) {
            f(id - w);
        }
    }

    /// Hop counts from `src` to every vertex; `u32::MAX` where unreachable
    /// (only at grid points that are not vertices).
    pub fn bfs(&self, src: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.present.len()];
        let mut queue = Vec::with_capacity(self.vertex_count);
        dist[src] = 0;
        queue.push(src);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            let next = dist[v] + 1;
            self.for_each_neighbour(v, |u| {
                if dist[u] == UNREACHED {
                    dist[u] = next;
                    queue.push(u);
                }
            });
        }
        dist
    }

    /// Hop count between two vertices.
    pub fn hops(&self, a: (u32, u32), b: (u32, u32)) -> u32 {
        self.bfs(self.id(a.0, a.1))[self.id(b.0, b.1)]
    }

    pub fn scale(&self) -> Rat {
        Rat::third_pow(self.level)
    }

    /// The canonical corner address of a vertex: the least `(word, corner)`
    /// over the kept cells that have it as a corner.
    pub fn vertex_address(&self, x: u32, y: u32) -> CornerAddress {
        let around = |c: u32| [c.checked_sub(1), (c < self.side).then_some(c)];
        around(x)
            .into_iter()
            .flatten()
            .flat_map(|cx| around(y).into_iter().flatten().map(move |cy| (cx, cy)))
            .filter(|&(cx, cy)| self.cell(cx, cy))
            .map(|(cx, cy)| CornerAddress {
                variant: self.variant,
                word: grid_to_word(cx as u64, cy as u64, self.level),
                corner: ((x - cx) as u8, (y - cy) as u8),
            })
            .min()
            .expect("vertex of a kept cell")
    }

    fn check_corner(&self, a: &CornerAddress) -> Result<(u32, u32)> {
        if a.variant != self.variant || a.level() != self.level {
            return Err(Error::VariantMismatch(format!(
                "address {:?} at level {} does not belong to the {} lattice at level {}",
                a.variant,
                a.level(),
                self.variant,
                self.level
            )));
        }
        let (x, y) = a.grid();
        Ok((x as u32, y as u32))
    }

    /// Lattice coordinates of an address refined to this graph's level.
    pub fn grid_point(&self, a: &Address) -> Result<(u32, u32)> {
        if a.variant() != self.variant {
            return Err(Error::VariantMismatch(format!("{a} on the {} lattice", self.variant)));
        }
        let p = eval(a);
        let n = Rat::int(pow3(self.level));
        let (gx, gy) = (p.x * n, p.y * n);
        if !(gx.is_integer() && gy.is_integer()) || a.level() > self.level {
            return Err(Error::NotCorner(format!("{a} at level {}", self.level)));
        }
        Ok((gx.numer() as u32, gy.numer() as u32))
    }

    /// Distance between two addresses whose tips become corners at this level.
    pub fn address_distance(&self, a: &Address, b: &Address) -> Result<Rat> {
        let (pa, pb) = (self.grid_point(a)?, self.grid_point(b)?);
        Ok(Rat::int(self.hops(pa, pb) as i128) * self.scale())
    }
}

/// Shortest-path length between two corner points of the graph's level.
pub fn geodesic_distance(g: &LatticeGraph, a: &CornerAddress, b: &CornerAddress) -> Result<Rat> {
    let pa = g.check_corner(a)?;
    let pb = g.check_corner(b)?;
    Ok(Rat::int(g.hops(pa, pb) as i128) * g.scale())
}

/// The closed form for corner points of `N^p⊗M₀`:
/// `|Σ (i_m − k_m)/3^(m+1)| + |Σ (j_m − l_m)/3^(m+1)|`, with the corner
/// offsets of the tips contributing at weight `3^-p`.
pub fn nqm_formula(a: &CornerAddress, b: &CornerAddress) -> Result<Rat> {
    if a.variant != Variant::N || b.variant != Variant::N {
        return Err(Error::VariantMismatch("the closed form only holds on N lattices".into()));
    }
    let coords = |c: &CornerAddress| {
        let mut x = Rat::ZERO;
        let mut y = Rat::ZERO;
        for (m, cell) in c.word.iter().enumerate() {
            let w = Rat::third_pow(m as u32 + 1);
            x += Rat::int(cell.i as i128) * w;
            y += Rat::int(cell.j as i128) * w;
        }
        let w = Rat::third_pow(c.level());
        (x + Rat::int(c.corner.0 as i128) * w, y + Rat::int(c.corner.1 as i128) * w)
    };
    let (xa, ya) = coords(a);
    let (xb, yb) = coords(b);
    Ok((xa - xb).abs() + (ya - yb).abs())
}

/// The image of `a` at level `k + j` under the chain maps, in canonical form.
pub fn refine(a: &Address, j: u32) -> Address {
    let mut word = a.word().to_vec();
    let mut tip = *a.tip();
    for _ in 0..j {
        let (cell, next) = side_embedding(&tip);
        word.push(cell);
        tip = next;
    }
    let raw = Address::from_parts(a.variant(), word, tip);
    normalize(&GlueTable::standard(a.variant()), &raw)
}

/// Level at which both tip coordinates become integers, if the tip is ternary.
pub fn corner_level(a: &Address) -> Result<u32> {
    let tip = a.tip();
    let ex = tip.x().ternary_exponent();
    let ey = tip.y().ternary_exponent();
    match (ex, ey) {
        (Some(ex), Some(ey)) => Ok(a.level() + ex.max(ey)),
        _ => Err(Error::NotTernary(tip.to_string())),
    }
}

/// Quotient-metric distance between two addresses of the same variant:
/// both are refined until their tips are corners, then measured on that lattice.
pub fn general_distance(a: &Address, b: &Address, k_max: u32) -> Result<Rat> {
    if a.variant() != b.variant() {
        return Err(Error::VariantMismatch(format!("{a} vs {b}")));
    }
    let level = corner_level(a)?.max(corner_level(b)?);
    let g = LatticeGraph::build(level, a.variant(), k_max)?;
    g.address_distance(a, b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    pub base: Rat,
    /// `(level, distance)` for each refined level checked.
    pub refined: Vec<(u32, Rat)>,
    pub first_disagreement: Option<u32>,
}

impl StabilityReport {
    pub fn stable(&self) -> bool {
        self.first_disagreement.is_none()
    }
}

/// Compares the distance at the pair's own level against the refined pair at
/// each of the next `extra_levels` levels.
pub fn distance_stable(
    a: &CornerAddress,
    b: &CornerAddress,
    extra_levels: u32,
    k_max: u32,
) -> Result<StabilityReport> {
    if a.variant != b.variant || a.level() != b.level() {
        return Err(Error::VariantMismatch("stability needs the same variant and level".into()));
    }
    let k = a.level();
    let base = geodesic_distance(&LatticeGraph::build(k, a.variant, k_max)?, a, b)?;
    let mut report = StabilityReport { base, refined: vec![], first_disagreement: None };
    for e in 1..=extra_levels {
        let g = LatticeGraph::build(k + e, a.variant, k_max)?;
        let d = geodesic_distance(&g, &a.refine(e), &b.refine(e))?;
        report.refined.push((k + e, d));
        if d != base && report.first_disagreement.is_none() {
            report.first_disagreement = Some(k + e);
        }
    }
    Ok(report)
}

/// How many pairs a sweep looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sample {
    All,
    /// Roughly this many random pairs, drawn as sources with
    /// [`TARGETS_PER_SOURCE`] targets each.
    Pairs(usize),
}

pub const TARGETS_PER_SOURCE: usize = 100;

/// Sources and their target lists for a sweep. `All` yields every unordered
/// pair once.
fn sweep_plan(g: &LatticeGraph, sample: Sample, seed: u64) -> Vec<(usize, Vec<usize>)> {
    let verts = g.vertices();
    match sample {
        Sample::All => verts
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, verts[i + 1..].to_vec()))
            .collect(),
        Sample::Pairs(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((g.level as u64) << 32));
            let sources = n.div_ceil(TARGETS_PER_SOURCE).max(1);
            let mut remaining = n;
            (0..sources)
                .map(|_| {
                    let s = *verts.choose(&mut rng).unwrap();
                    let want = remaining.min(TARGETS_PER_SOURCE);
                    remaining -= want;
                    let targets = (0..want)
                        .map(|_| loop {
                            let t = *verts.choose(&mut rng).unwrap();
                            if t != s {
                                break t;
                            }
                        })
                        .collect();
                    (s, targets)
                })
                .collect()
        }
    }
}

/// A pair of lattice points with their lattice and taxicab distances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairWitness {
    pub a: Point2,
    pub b: Point2,
    pub lattice: Rat,
    pub taxicab: Rat,
}

impl PairWitness {
    fn new(g: &LatticeGraph, s: usize, t: usize, hops: u32) -> PairWitness {
        let pt = |id| {
            let (x, y) = g.coords(id);
            Point2::raw(Rat::int(x as i128) * g.scale(), Rat::int(y as i128) * g.scale())
        };
        let (a, b) = (pt(s), pt(t));
        PairWitness { lattice: Rat::int(hops as i128) * g.scale(), taxicab: taxicab(&a, &b), a, b }
    }
}

/// Outcome of checking `taxicab ≤ lattice ≤ 2·taxicab` over a set of pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BandReport {
    pub variant: Variant,
    pub level: u32,
    pub pairs: usize,
    pub violations: usize,
    pub first_violation: Option<PairWitness>,
    /// Largest lattice/taxicab ratio seen, with its first witness.
    pub max_ratio: Rat,
    pub max_witness: Option<PairWitness>,
}

impl BandReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Default)]
struct BandAcc {
    pairs: usize,
    violations: usize,
    first_violation: Option<(usize, usize, u32)>,
    best: Option<(u32, u32, usize, usize)>,
}

impl BandAcc {
    fn merge(&mut self, o: BandAcc) {
        self.pairs += o.pairs;
        self.violations += o.violations;
        if self.first_violation.is_none() {
            self.first_violation = o.first_violation;
        }
        if let Some(b) = o.best {
            let better = match self.best {
                None => true,
                Some(cur) => (b.0 as u64) * (cur.1 as u64) > (cur.0 as u64) * (b.1 as u64),
            };
            if better {
                self.best = Some(b);
            }
        }
    }
}

fn band_sweep(
    g: &LatticeGraph,
    plan: Vec<(usize, Vec<usize>)>,
    keep: impl Fn((u32, u32), (u32, u32)) -> bool + Sync,
) -> BandReport {
    let accs: Vec<BandAcc> = plan
        .into_par_iter()
        .map(|(s, targets)| {
            let dist = g.bfs(s);
            let ps = g.coords(s);
            let mut acc = BandAcc::default();
            for t in targets {
                let pt = g.coords(t);
                if !keep(ps, pt) {
                    continue;
                }
                let l1 = ps.0.abs_diff(pt.0) + ps.1.abs_diff(pt.1);
                let hops = dist[t];
                acc.pairs += 1;
                if hops < l1 || hops > 2 * l1 {
                    acc.violations += 1;
                    acc.first_violation.get_or_insert((s, t, hops));
                }
                acc.merge(BandAcc { best: Some((hops, l1, s, t)), ..Default::default() });
            }
            acc
        })
        .collect();
    let mut total = BandAcc::default();
    for a in accs {
        total.merge(a);
    }
    BandReport {
        variant: g.variant,
        level: g.level,
        pairs: total.pairs,
        violations: total.violations,
        first_violation: total.first_violation.map(|(s, t, h)| PairWitness::new(g, s, t, h)),
        max_ratio: total.best.map_or(Rat::ZERO, |(h, l, _, _)| Rat::new(h as i128, l as i128)),
        max_witness: total.best.map(|(h, _, s, t)| PairWitness::new(g, s, t, h)),
    }
}

/// Sweeps corner pairs of the level-`k` `M` lattice and checks
/// `taxicab ≤ lattice ≤ 2·taxicab`, reporting the largest ratio.
pub fn verify_bilipschitz(k: u32, sample: Sample, seed: u64, k_max: u32) -> Result<BandReport> {
    let g = LatticeGraph::build(k, Variant::M, k_max)?;
    let plan = sweep_plan(&g, sample, seed);
    Ok(band_sweep(&g, plan, |_, _| true))
}

/// The same band restricted to pairs sharing a row or a column, exhaustive.
pub fn lower_bound_check(k: u32, k_max: u32) -> Result<BandReport> {
    let g = LatticeGraph::build(k, Variant::M, k_max)?;
    let plan = sweep_plan(&g, Sample::All, 0);
    Ok(band_sweep(&g, plan, |a, b| a.0 == b.0 || a.1 == b.1))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NqmMismatch {
    pub a: CornerAddress,
    pub b: CornerAddress,
    pub formula: Rat,
    pub lattice: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NqmReport {
    pub level: u32,
    pub pairs: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<NqmMismatch>,
}

/// Compares [`nqm_formula`] with breadth-first search on the level-`k` `N` lattice.
pub fn nqm_check(k: u32, sample: Sample, seed: u64, k_max: u32) -> Result<NqmReport> {
    let g = LatticeGraph::build(k, Variant::N, k_max)?;
    let plan = sweep_plan(&g, sample, seed);
    let results: Vec<(usize, usize, Option<NqmMismatch>)> = plan
        .into_par_iter()
        .map(|(s, targets)| {
            let dist = g.bfs(s);
            let (sx, sy) = g.coords(s);
            let a = g.vertex_address(sx, sy);
            let mut bad = 0;
            let mut first = None;
            for t in &targets {
                let (tx, ty) = g.coords(*t);
                let b = g.vertex_address(tx, ty);
                let formula = nqm_formula(&a, &b).expect("N addresses");
                let lattice = Rat::int(dist[*t] as i128) * g.scale();
                if formula != lattice {
                    bad += 1;
                    first.get_or_insert(NqmMismatch { a: a.clone(), b, formula, lattice });
                }
            }
            (targets.len(), bad, first)
        })
        .collect();
    let mut report = NqmReport { level: k, pairs: 0, mismatches: 0, first_mismatch: None };
    for (n, bad, first) in results {
        report.pairs += n;
        report.mismatches += bad;
        if report.first_mismatch.is_none() {
            report.first_mismatch = first;
        }
    }
    Ok(report)
}

/// A failing pair: the cell prefix (scaling sweeps only) and both endpoints.
pub type SweepFailure = (Option<Cell>, (u32, u32), (u32, u32));

/// Result of an exhaustive structural sweep (stability or per-copy scaling).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub variant: Variant,
    pub level: u32,
    pub pairs: usize,
    pub failures: usize,
    /// First failing pair as lattice coordinates at `level`, with the cell
    /// prefix for scaling sweeps.
    pub first_failure: Option<SweepFailure>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Every corner pair at level `k` keeps its distance on each of the next
/// `extra` levels.
pub fn stability_sweep(variant: Variant, k: u32, extra: u32, k_max: u32) -> Result<SweepReport> {
    let base = LatticeGraph::build(k, variant, k_max)?;
    let fine: Vec<LatticeGraph> = (1..=extra)
        .map(|e| LatticeGraph::build(k + e, variant, k_max))
        .collect::<Result<_>>()?;
    let verts = base.vertices();
    let rows: Vec<(usize, usize, Option<_>)> = verts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let d0 = base.bfs(s);
            let (sx, sy) = base.coords(s);
            let finer: Vec<Vec<u32>> = fine
                .iter()
                .enumerate()
                .map(|(e, g)| {
                    let m = pow3(e as u32 + 1) as u32;
                    g.bfs(g.id(sx * m, sy * m))
                })
                .collect();
            let mut pairs = 0;
            let mut bad = 0;
            let mut first = None;
            for &t in &verts[i + 1..] {
                let (tx, ty) = base.coords(t);
                pairs += 1;
                let ok = fine.iter().zip(&finer).enumerate().all(|(e, (g, d))| {
                    let m = pow3(e as u32 + 1) as u32;
                    d[g.id(tx * m, ty * m)] == d0[t] * m
                });
                if !ok {
                    bad += 1;
                    first.get_or_insert((None, (sx, sy), (tx, ty)));
                }
            }
            (pairs, bad, first)
        })
        .collect();
    Ok(collect_sweep(variant, k, rows))
}

/// For each cell `m` and each corner pair at level `k`, the pair prefixed by
/// `m` at level `k+1` sits at exactly a third of the original distance.
pub fn scaling_sweep(variant: Variant, k: u32, k_max: u32) -> Result<SweepReport> {
    let base = LatticeGraph::build(k, variant, k_max)?;
    let fine = LatticeGraph::build(k + 1, variant, k_max)?;
    let off = base.side();
    let verts = base.vertices();
    let rows: Vec<(usize, usize, Option<_>)> = verts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let d0 = base.bfs(s);
            let (sx, sy) = base.coords(s);
            let mut pairs = 0;
            let mut bad = 0;
            let mut first = None;
            for cell in variant.cells() {
                let (ox, oy) = (cell.i as u32 * off, cell.j as u32 * off);
                let d1 = fine.bfs(fine.id(ox + sx, oy + sy));
                for &t in &verts[i + 1..] {
                    let (tx, ty) = base.coords(t);
                    pairs += 1;
                    // level-(k+1) hops scale by 3^-(k+1), level-k hops by 3^-k
                    if d1[fine.id(ox + tx, oy + ty)] != d0[t] {
                        bad += 1;
                        first.get_or_insert((Some(cell), (sx, sy), (tx, ty)));
                    }
                }
            }
            (pairs, bad, first)
        })
        .collect();
    Ok(collect_sweep(variant, k, rows))
}

type SweepRow = (usize, usize, Option<(Option<Cell>, (u32, u32), (u32, u32))>);

fn collect_sweep(variant: Variant, level: u32, rows: Vec<SweepRow>) -> SweepReport {
    let mut r = SweepReport { variant, level, pairs: 0, failures: 0, first_failure: None };
    for (pairs, bad, first) in rows {
        r.pairs += pairs;
        r.failures += bad;
        if r.first_failure.is_none() {
            r.first_failure = first;
        }
    }
    r
}

type Field = Arc<Vec<u32>>;

/// The glued space at `level` as a square metric space: `S` unrolls the
/// boundary embedding `level` times, and distances are lattice distances at
/// `resolution ≥ level`, where every sampled point must become a corner.
pub struct LatticeOracle {
    level: u32,
    graph: LatticeGraph,
    cache: Mutex<HashMap<(u32, u32), Field>>,
}

impl LatticeOracle {
    pub fn new(variant: Variant, level: u32, resolution: u32, k_max: u32) -> Result<LatticeOracle> {
        let graph = LatticeGraph::build(resolution.max(level), variant, k_max)?;
        Ok(LatticeOracle { level, graph, cache: Mutex::new(HashMap::new()) })
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    fn field(&self, p: (u32, u32)) -> Arc<Vec<u32>> {
        let mut cache = self.cache.lock().unwrap();
        cache
            .entry(p)
            .or_insert_with(|| Arc::new(self.graph.bfs(self.graph.id(p.0, p.1))))
            .clone()
    }
}

impl SquareMetric for LatticeOracle {
    type Point = Address;

    fn embed(&self, p: &BoundaryPoint) -> Address {
        Address::from_boundary(self.graph.variant(), p, self.level)
    }

    fn distance(&self, a: &Address, b: &Address) -> Rat {
        let pa = self.graph.grid_point(a).expect("oracle resolution too coarse for this point");
        let pb = self.graph.grid_point(b).expect("oracle resolution too coarse for this point");
        let hops = self.field(pa)[self.graph.id(pb.0, pb.1)];
        Rat::int(hops as i128) * self.graph.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gluing::parse_address;
    use crate::squarespace::{validate_sq1, validate_sq2};

    fn c(i: u8, j: u8) -> Cell {
        Cell::new(i, j)
    }

    fn r(n: i128, d: i128) -> Rat {
        Rat::new(n, d)
    }

    #[test]
    fn small_lattice_counts() {
        let g0 = LatticeGraph::build(0, Variant::M, 6).unwrap();
        assert_eq!((g0.vertex_count(), g0.edge_count()), (4, 4));
        let m1 = LatticeGraph::build(1, Variant::M, 6).unwrap();
        assert_eq!(m1.kept_cells().count(), 8);
        assert_eq!((m1.vertex_count(), m1.edge_count()), (16, 24));
        let n1 = LatticeGraph::build(1, Variant::N, 6).unwrap();
        assert_eq!((n1.vertex_count(), n1.edge_count()), (16, 24));
        let n3 = LatticeGraph::build(3, Variant::N, 6).unwrap();
        assert_eq!(n3.vertex_count(), 28 * 28);
    }

    #[test]
    fn m_lattice_counts_match_enumeration() {
        // brute force: kept cells are 8^k; vertices are distinct cell corners
        for k in 0..=3 {
            let g = LatticeGraph::build(k, Variant::M, 6).unwrap();
            let side = pow3(k) as u32;
            let mut corners = std::collections::BTreeSet::new();
            let mut cells = 0;
            for x in 0..side {
                for y in 0..side {
                    let w = grid_to_word(x as u64, y as u64, k);
                    if w.iter().all(|c| !c.is_centre()) {
                        cells += 1;
                        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            corners.insert((x + dx, y + dy));
                        }
                    }
                }
            }
            assert_eq!(cells, 8usize.pow(k));
            assert_eq!(g.kept_cells().count(), cells);
            assert_eq!(g.vertex_count(), corners.len());
        }
    }

    #[test]
    fn level_guard() {
        assert_eq!(
            LatticeGraph::build(7, Variant::N, 6).unwrap_err(),
            Error::LevelTooDeep { requested: 7, max: 6 }
        );
    }

    #[test]
    fn worked_n2_example() {
        let a = CornerAddress::new(Variant::N, vec![c(0, 0), c(2, 2)], (0, 0)).unwrap();
        let b = CornerAddress::new(Variant::N, vec![c(2, 2), c(0, 0)], (1, 0)).unwrap();
        assert_eq!(a.grid(), (2, 2));
        assert_eq!(b.grid(), (7, 6));
        let g = LatticeGraph::build(2, Variant::N, 6).unwrap();
        assert_eq!(geodesic_distance(&g, &a, &b).unwrap(), Rat::ONE);
        assert_eq!(nqm_formula(&a, &b).unwrap(), Rat::ONE);
        assert_eq!(geodesic_distance(&g, &a, &a).unwrap(), Rat::ZERO);
        assert_eq!(nqm_formula(&a, &a).unwrap(), Rat::ZERO);
    }

    #[test]
    fn nqm_rejects_m() {
        let a = CornerAddress::new(Variant::M, vec![c(0, 0)], (0, 0)).unwrap();
        assert!(nqm_formula(&a, &a).is_err());
    }

    #[test]
    fn around_the_level_one_hole() {
        let g = LatticeGraph::build(1, Variant::M, 6).unwrap();
        assert_eq!(g.hops((1, 1), (2, 2)), 2);
        let a = g.vertex_address(1, 1);
        let b = g.vertex_address(2, 2);
        assert_eq!(geodesic_distance(&g, &a, &b).unwrap(), r(2, 3));
    }

    #[test]
    fn mismatched_address_is_an_error() {
        let g = LatticeGraph::build(2, Variant::M, 6).unwrap();
        let a = CornerAddress::new(Variant::M, vec![c(0, 0)], (0, 0)).unwrap();
        assert!(geodesic_distance(&g, &a, &a).is_err());
        let n = CornerAddress::new(Variant::N, vec![c(0, 0), c(0, 0)], (0, 0)).unwrap();
        assert!(geodesic_distance(&g, &n, &n).is_err());
    }

    #[test]
    fn vertex_address_is_canonical() {
        for variant in [Variant::M, Variant::N] {
            let g = LatticeGraph::build(2, variant, 6).unwrap();
            for id in g.vertices() {
                let (x, y) = g.coords(id);
                let ca = g.vertex_address(x, y);
                assert_eq!(ca.grid(), (x as u64, y as u64));
                let addr = ca.to_address();
                assert_eq!(addr.word(), ca.word());
                assert_eq!(addr.tip().as_corner(), Some(ca.corner()));
            }
        }
    }

    #[test]
    fn refine_examples() {
        let a = CornerAddress::new(Variant::M, vec![c(2, 1), c(0, 2)], (0, 0)).unwrap();
        let two = a.refine(2);
        assert_eq!(two.word(), &[c(2, 1), c(0, 2), c(0, 0), c(0, 0)]);
        assert_eq!(two.corner(), (0, 0));
        assert_eq!(two.eval(), a.eval());
        assert_eq!(a.refine(0), a);
        let b = CornerAddress::new(Variant::M, vec![c(1, 0)], (1, 1)).unwrap();
        assert_eq!(b.refine(1).word(), &[c(1, 0), c(2, 2)]);
        assert_eq!(b.refine(3).eval(), b.eval());

        let addr = parse_address("M:(1,2)@(1/9,1)", None).unwrap();
        assert_eq!(refine(&addr, 0), addr);
        assert_eq!(eval(&refine(&addr, 3)), eval(&addr));
    }

    #[test]
    fn general_distance_examples() {
        let k = DEFAULT_K_MAX;
        // the vertical pair straddling the hole at x = 4/9
        let a = parse_address("M:(1,0)@(1/3,1)", None).unwrap();
        let b = parse_address("M:(1,2)@(1/3,0)", None).unwrap();
        assert_eq!(general_distance(&a, &b, k).unwrap(), r(5, 9));
        assert_eq!(general_distance(&a, &a, k).unwrap(), Rat::ZERO);
        let o = parse_address("M:(0,0)@(0,0)", None).unwrap();
        let e = parse_address("M:(1,0)@(0,0)", None).unwrap();
        assert_eq!(general_distance(&o, &e, k).unwrap(), r(1, 3));
        let half = parse_address("M:(1,0)@(1/2,1)", None).unwrap();
        assert!(matches!(general_distance(&half, &o, k), Err(Error::NotTernary(_))));
        let deep = parse_address("M:(0,0)@(1/729,0)", None).unwrap();
        assert!(matches!(general_distance(&deep, &o, k), Err(Error::LevelTooDeep { .. })));
    }

    #[test]
    fn stability_examples() {
        for variant in [Variant::M, Variant::N] {
            let g = LatticeGraph::build(1, variant, 6).unwrap();
            let verts = g.vertices();
            for &s in &verts {
                for &t in &verts {
                    let (a, b) = (g.coords(s), g.coords(t));
                    let ra = g.vertex_address(a.0, a.1);
                    let rb = g.vertex_address(b.0, b.1);
                    let rep = distance_stable(&ra, &rb, 2, 6).unwrap();
                    assert!(rep.stable(), "{ra:?} {rb:?} {rep:?}");
                }
            }
        }
    }

    #[test]
    fn bilipschitz_at_level_one_and_two() {
        let one = verify_bilipschitz(1, Sample::All, 0, 6).unwrap();
        assert!(one.passed());
        assert_eq!(one.pairs, 16 * 15 / 2);
        // level-1 corners always have a monotone path
        assert_eq!(one.max_ratio, Rat::ONE);
        let two = verify_bilipschitz(2, Sample::All, 0, 6).unwrap();
        assert!(two.passed());
        assert!(two.max_ratio >= r(5, 3));
        assert!(two.max_ratio <= Rat::TWO);
    }

    #[test]
    fn the_hole_pair_has_ratio_five_thirds() {
        let g = LatticeGraph::build(2, Variant::M, 6).unwrap();
        let hops = g.hops((3, 4), (6, 4));
        assert_eq!(Rat::int(hops as i128) * g.scale(), r(5, 9));
        assert_eq!(Rat::new(hops as i128, 3), r(5, 3));
        let corners = g.hops((0, 0), (9, 9));
        assert_eq!(Rat::int(corners as i128) * g.scale(), Rat::TWO);
    }

    #[test]
    fn segment_bound_small_levels() {
        for k in 1..=3 {
            let rep = lower_bound_check(k, 6).unwrap();
            assert!(rep.passed(), "{rep:?}");
        }
    }

    #[test]
    fn glued_oracles_satisfy_the_axioms() {
        for variant in [Variant::M, Variant::N] {
            for level in 1..=2 {
                let o = LatticeOracle::new(variant, level, 3, 6).unwrap();
                assert!(validate_sq1(&o, 3).passed(), "{variant} {level}");
                assert!(validate_sq2(&o, 3).passed(), "{variant} {level}");
            }
        }
    }

    #[test]
    fn taxicab_is_dominated_by_lattice_distance() {
        let g = LatticeGraph::build(2, Variant::M, 6).unwrap();
        let verts = g.vertices();
        for &s in &verts {
            let d = g.bfs(s);
            let (sx, sy) = g.coords(s);
            for &t in &verts {
                let (tx, ty) = g.coords(t);
                assert!(sx.abs_diff(tx) + sy.abs_diff(ty) <= d[t]);
            }
        }
    }

    #[test]
    fn lattice_distance_is_a_metric() {
        let g = LatticeGraph::build(2, Variant::M, 6).unwrap();
        let verts = g.vertices();
        let fields: Vec<Vec<u32>> = verts.iter().map(|&v| g.bfs(v)).collect();
        for (i, &a) in verts.iter().enumerate() {
            assert_eq!(fields[i][a], 0);
            for (j, &b) in verts.iter().enumerate() {
                assert_eq!(fields[i][b], fields[j][a]);
                for &cc in verts.iter().step_by(7) {
                    assert!(fields[i][cc] <= fields[i][b] + fields[j][cc]);
                }
            }
        }
    }

    #[test]
    fn edge_listing_matches_count() {
        for (k, v) in [(1, Variant::M), (2, Variant::M), (2, Variant::N)] {
            let g = LatticeGraph::build(k, v, 6).unwrap();
            assert_eq!(g.edges().count(), g.edge_count());
        }
    }
}
