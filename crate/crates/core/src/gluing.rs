//! Addresses in the iterated glued spaces `M^k⊗M₀` and `N^k⊗M₀`.
//!
//! A level-`k` address is a word of `k` cells of the 3×3 grid together with
//! a tip on the boundary square. Neighbouring copies share boundary segments,
//! so one point usually has several raw addresses; the gluing table lists the
//! shared segments and [`Address`] always stores the lexicographically least
//! member of the class.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::plane::Point2;
use crate::rat::{pow3, Rat};
use crate::squarespace::{side_embedding, BoundaryPoint, Side};

/// Which grid is being iterated: `M` drops the centre cell, `N` keeps all nine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Variant {
    M,
    N,
}

impl Variant {
    pub fn allows(self, cell: Cell) -> bool {
        self == Variant::N || !cell.is_centre()
    }

    /// The admissible cells in lexicographic order.
    pub fn cells(self) -> impl Iterator<Item = Cell> {
        (0..3u8)
            .flat_map(|i| (0..3u8).map(move |j| Cell::new(i, j)))
            .filter(move |c| self.allows(*c))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::M => "M",
            Variant::N => "N",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s.trim() {
            "M" | "m" => Ok(Variant::M),
            "N" | "n" => Ok(Variant::N),
            other => Err(Error::parse(1, format!("unknown variant `{other}`, expected M or N"))),
        }
    }
}

/// A cell `(column, row)` of the 3×3 grid.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub i: u8,
    pub j: u8,
}

impl Cell {
    pub const fn new(i: u8, j: u8) -> Cell {
        assert!(i < 3 && j < 3);
        Cell { i, j }
    }

    pub fn is_centre(self) -> bool {
        self.i == 1 && self.j == 1
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `(i/3, j/3)`, the lower-left corner of the cell.
pub fn shrink(cell: Cell) -> Point2 {
    Point2::raw(Rat::new(cell.i as i128, 3), Rat::new(cell.j as i128, 3))
}

/// `shrink(cell) + z/3`: places `z` inside the given cell.
pub fn alpha(cell: Cell, z: &Point2) -> Point2 {
    let s = shrink(cell);
    Point2::raw(s.x + z.x * Rat::THIRD, s.y + z.y * Rat::THIRD)
}

/// Grid coordinates, in units of `3^-k`, of the lower-left corner of a word's cell.
pub fn word_to_grid(word: &[Cell]) -> (u64, u64) {
    word.iter()
        .fold((0, 0), |(x, y), c| (3 * x + c.i as u64, 3 * y + c.j as u64))
}

/// Inverse of [`word_to_grid`] for a level-`k` grid.
pub fn grid_to_word(mut x: u64, mut y: u64, k: u32) -> Vec<Cell> {
    let mut word = vec![Cell::new(0, 0); k as usize];
    for slot in word.iter_mut().rev() {
        *slot = Cell::new((x % 3) as u8, (y % 3) as u8);
        x /= 3;
        y /= 3;
    }
    debug_assert!(x == 0 && y == 0, "grid coordinate out of range");
    word
}

/// Whether the level-`k` grid cell `(x, y)` survives in the given variant:
/// for `M`, no digit position may hold the centre in both coordinates.
pub fn cell_kept(variant: Variant, mut x: u64, mut y: u64, k: u32) -> bool {
    if variant == Variant::N {
        return true;
    }
    for _ in 0..k {
        if x % 3 == 1 && y % 3 == 1 {
            return false;
        }
        x /= 3;
        y /= 3;
    }
    true
}

/// `(a, side_a(r)) ≈ (b, side_b(r))` for every `r ∈ [0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GlueRecord {
    pub a: Cell,
    pub side_a: Side,
    pub b: Cell,
    pub side_b: Side,
}

const fn rec(a: (u8, u8), side_a: Side, b: (u8, u8), side_b: Side) -> GlueRecord {
    GlueRecord { a: Cell::new(a.0, a.1), side_a, b: Cell::new(b.0, b.1), side_b }
}

/// The eight identifications around the ring of `M`.
pub const RING: [GlueRecord; 8] = [
    rec((0, 0), Side::Top, (0, 1), Side::Bottom),
    rec((0, 1), Side::Top, (0, 2), Side::Bottom),
    rec((0, 2), Side::Right, (1, 2), Side::Left),
    rec((1, 2), Side::Right, (2, 2), Side::Left),
    rec((2, 2), Side::Bottom, (2, 1), Side::Top),
    rec((2, 1), Side::Bottom, (2, 0), Side::Top),
    rec((2, 0), Side::Left, (1, 0), Side::Right),
    rec((1, 0), Side::Left, (0, 0), Side::Right),
];

/// The four extra identifications attaching the centre cell in `N`.
pub const CENTRE: [GlueRecord; 4] = [
    rec((0, 1), Side::Right, (1, 1), Side::Left),
    rec((1, 2), Side::Bottom, (1, 1), Side::Top),
    rec((2, 1), Side::Left, (1, 1), Side::Right),
    rec((1, 0), Side::Top, (1, 1), Side::Bottom),
];

/// A gluing relation given as segment identifications.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlueTable {
    variant: Variant,
    records: Vec<GlueRecord>,
}

impl GlueTable {
    pub fn standard(variant: Variant) -> GlueTable {
        let mut records = RING.to_vec();
        if variant == Variant::N {
            records.extend_from_slice(&CENTRE);
        }
        GlueTable { variant, records }
    }

    /// An arbitrary table, e.g. a deliberately broken one for negative controls.
    pub fn custom(variant: Variant, records: Vec<GlueRecord>) -> GlueTable {
        GlueTable { variant, records }
    }

    /// Reads `variant M|N` followed by one `(i,j) side (i,j) side` record per
    /// line, sides named `left`, `right`, `bottom`, `top`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<GlueTable> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hn, header) = lines.next().ok_or_else(|| Error::line(1, "missing `variant` header"))?;
        let variant: Variant = header
            .strip_prefix("variant")
            .ok_or_else(|| Error::line(hn, "expected `variant M|N`"))?
            .trim()
            .parse()
            .map_err(|e: Error| Error::line(hn, e.to_string()))?;
        let cell = |n: usize, tok: &str| -> Result<Cell> {
            match tok.as_bytes() {
                [b'(', a @ b'0'..=b'2', b',', b @ b'0'..=b'2', b')'] => Ok(Cell::new(a - b'0', b - b'0')),
                _ => Err(Error::line(n, format!("bad cell `{tok}`"))),
            }
        };
        let side = |n: usize, tok: &str| -> Result<Side> {
            match tok {
                "left" => Ok(Side::Left),
                "right" => Ok(Side::Right),
                "bottom" => Ok(Side::Bottom),
                "top" => Ok(Side::Top),
                _ => Err(Error::line(n, format!("bad side `{tok}`"))),
            }
        };
        let mut records = Vec::new();
        for (n, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [a, sa, b, sb] = toks[..] else {
                return Err(Error::line(n, "expected `(i,j) side (i,j) side`"));
            };
            let rec = GlueRecord { a: cell(n, a)?, side_a: side(n, sa)?, b: cell(n, b)?, side_b: side(n, sb)? };
            if !variant.allows(rec.a) || !variant.allows(rec.b) {
                return Err(Error::line(n, format!("cell not allowed under {variant}")));
            }
            records.push(rec);
        }
        Ok(GlueTable { variant, records })
    }

    pub fn to_text(&self) -> String {
        let side = |s: Side| match s {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        };
        let mut out = format!("variant {}\n", self.variant);
        for r in &self.records {
            out.push_str(&format!("{} {} {} {}\n", r.a, side(r.side_a), r.b, side(r.side_b)));
        }
        out
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn records(&self) -> &[GlueRecord] {
        &self.records
    }

    /// Everything one identification step away from `(cell, p)`.
    pub fn neighbours(&self, cell: Cell, p: &BoundaryPoint) -> Vec<(Cell, BoundaryPoint)> {
        let mut out = Vec::new();
        for r in &self.records {
            for (from, side_from, to, side_to) in
                [(r.a, r.side_a, r.b, r.side_b), (r.b, r.side_b, r.a, r.side_a)]
            {
                if from != cell {
                    continue;
                }
                for (side, t) in p.sides() {
                    if side == side_from {
                        out.push((to, side_to.point(t)));
                    }
                }
            }
        }
        out
    }

    /// Membership in the symmetrised relation (not its closure).
    pub fn related(&self, a: (Cell, BoundaryPoint), b: (Cell, BoundaryPoint)) -> bool {
        self.neighbours(a.0, &a.1).contains(&b)
    }
}

/// [`GlueTable::related`] against the standard table of `variant`.
pub fn glue_related(variant: Variant, a: (Cell, BoundaryPoint), b: (Cell, BoundaryPoint)) -> bool {
    GlueTable::standard(variant).related(a, b)
}

/// A point of `M^k⊗M₀` or `N^k⊗M₀` in canonical form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Address {
    variant: Variant,
    word: Vec<Cell>,
    tip: BoundaryPoint,
}

impl Address {
    /// Validates the word and stores the canonical representative.
    pub fn new(variant: Variant, word: Vec<Cell>, tip: BoundaryPoint) -> Result<Address> {
        let raw = Address::raw(variant, word, tip)?;
        Ok(normalize(&GlueTable::standard(variant), &raw))
    }

    /// Validates the word but keeps the representative as given.
    pub fn raw(variant: Variant, word: Vec<Cell>, tip: BoundaryPoint) -> Result<Address> {
        if word.iter().any(|c| !variant.allows(*c)) {
            return Err(Error::ForbiddenIndex);
        }
        Ok(Address { variant, word, tip })
    }

    /// `S_{X^k⊗M₀}(p)`: the boundary embedding unrolled through `k` levels.
    pub fn from_boundary(variant: Variant, p: &BoundaryPoint, k: u32) -> Address {
        let (word, tip) = embed_levels(p, k);
        Address { variant, word, tip }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn word(&self) -> &[Cell] {
        &self.word
    }

    pub fn tip(&self) -> &BoundaryPoint {
        &self.tip
    }

    pub fn level(&self) -> u32 {
        self.word.len() as u32
    }

    pub fn is_canonical(&self) -> bool {
        normalize(&GlueTable::standard(self.variant), self) == *self
    }

    pub(crate) fn from_parts(variant: Variant, word: Vec<Cell>, tip: BoundaryPoint) -> Address {
        Address { variant, word, tip }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.variant)?;
        for c in &self.word {
            write!(f, "{c}")?;
        }
        write!(f, "@{}", self.tip)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Unrolls the boundary embedding `k` times, outermost cell first.
pub fn embed_levels(p: &BoundaryPoint, k: u32) -> (Vec<Cell>, BoundaryPoint) {
    let mut word = Vec::with_capacity(k as usize);
    let mut cur = *p;
    for _ in 0..k {
        let (cell, next) = side_embedding(&cur);
        word.push(cell);
        cur = next;
    }
    (word, cur)
}

/// Folds [`alpha`] over the word, innermost first, starting from the tip.
pub fn eval(a: &Address) -> Point2 {
    eval_parts(&a.word, &a.tip)
}

fn eval_parts(word: &[Cell], tip: &BoundaryPoint) -> Point2 {
    word.iter().rev().fold(tip.point(), |z, c| alpha(*c, &z))
}

fn on_outer_boundary(p: &Point2) -> Option<BoundaryPoint> {
    BoundaryPoint::new(p.x, p.y).ok()
}

type RawAddress = (Vec<Cell>, BoundaryPoint);

/// The equivalence class of a raw address under the closure of the table,
/// applied at every level of the word.
///
/// A point `m ⊗ x` with `x` at level `k-1` is related to `m ⊗ x'` for every
/// `x'` in the class of `x`, and, when `x` is the boundary image `S(q)`, to
/// `n ⊗ S(q')` for every `(n, q')` glued to `(m, q)`.
pub fn class_under(table: &GlueTable, word: &[Cell], tip: &BoundaryPoint) -> BTreeSet<RawAddress> {
    let mut seen = BTreeSet::new();
    if word.is_empty() {
        seen.insert((Vec::new(), *tip));
        return seen;
    }
    let mut queue = VecDeque::from([(word.to_vec(), *tip)]);
    while let Some((w, t)) = queue.pop_front() {
        if !seen.insert((w.clone(), t)) {
            continue;
        }
        let head = w[0];
        let inner = &w[1..];
        let prefixed = |rest: RawAddress, cell: Cell| {
            let mut nw = Vec::with_capacity(w.len());
            nw.push(cell);
            nw.extend(rest.0);
            (nw, rest.1)
        };
        for rep in class_under(table, inner, &t) {
            queue.push_back(prefixed(rep, head));
        }
        if let Some(q) = on_outer_boundary(&eval_parts(inner, &t)) {
            for (cell, q2) in table.neighbours(head, &q) {
                let (ew, et) = embed_levels(&q2, inner.len() as u32);
                for rep in class_under(table, &ew, &et) {
                    queue.push_back(prefixed(rep, cell));
                }
            }
        }
    }
    seen
}

/// The lexicographically least representative of the address's class.
pub fn normalize(table: &GlueTable, a: &Address) -> Address {
    let (word, tip) = class_under(table, &a.word, &a.tip)
        .into_iter()
        .next()
        .expect("a class contains its seed");
    Address { variant: a.variant, word, tip }
}

/// The class computed from geometry alone: every kept level-`k` cell whose
/// closed square contains the evaluated point. Independent of any gluing
/// table, so it serves as the reference for [`class_under`].
pub fn geometric_class(variant: Variant, word: &[Cell], tip: &BoundaryPoint) -> BTreeSet<RawAddress> {
    let k = word.len() as u32;
    let scale = Rat::int(pow3(k));
    let p = eval_parts(word, tip);
    let (gx, gy) = (p.x * scale, p.y * scale);
    let candidates = |g: Rat| -> Vec<i128> {
        let f = g.floor();
        let mut v = vec![f];
        if g.is_integer() {
            v.push(f - 1);
        }
        v.retain(|c| *c >= 0 && *c < pow3(k));
        v
    };
    let mut out = BTreeSet::new();
    for cx in candidates(gx) {
        for cy in candidates(gy) {
            if !cell_kept(variant, cx as u64, cy as u64, k) {
                continue;
            }
            let local = BoundaryPoint::new(gx - Rat::int(cx), gy - Rat::int(cy))
                .expect("a grid-line point lies on the boundary of each cell containing it");
            out.insert((grid_to_word(cx as u64, cy as u64, k), local));
        }
    }
    out
}

/// Parses `M:(0,1)(2,0)@(1/3,0)`. The `M:`/`N:` prefix may be omitted when a
/// default variant is supplied. Error positions are 1-based columns.
pub fn parse_address(s: &str, default: Option<Variant>) -> Result<Address> {
    let mut p = Cursor { src: s.as_bytes(), pos: 0 };
    p.skip_ws();
    let variant = match (p.peek(), p.src.get(p.pos + 1)) {
        (Some(b'M' | b'N' | b'm' | b'n'), Some(b':')) => {
            let v = (p.src[p.pos] as char).to_string().parse()?;
            p.pos += 2;
            v
        }
        _ => default.ok_or_else(|| p.err("expected variant prefix `M:` or `N:`"))?,
    };
    let mut word = Vec::new();
    p.skip_ws();
    while p.peek() == Some(b'(') {
        let start = p.pos;
        p.expect(b'(')?;
        let i = p.digit()?;
        p.expect(b',')?;
        let j = p.digit()?;
        p.expect(b')')?;
        let cell = Cell::new(i, j);
        if !variant.allows(cell) {
            return Err(Error::parse(start + 1, "cell (1,1) is not allowed in an M word"));
        }
        word.push(cell);
        p.skip_ws();
    }
    p.expect(b'@')?;
    p.skip_ws();
    let tip_start = p.pos;
    p.expect(b'(')?;
    let close = s[p.pos..]
        .find(')')
        .map(|off| p.pos + off)
        .ok_or_else(|| p.err("unterminated tip"))?;
    let tip: BoundaryPoint = s[tip_start..=close]
        .parse()
        .map_err(|e: Error| Error::parse(tip_start + 1, e.to_string()))?;
    p.pos = close + 1;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Address::new(variant, word, tip)
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::parse(self.pos + 1, msg)
    }

    fn expect(&mut self, b: u8) -> Result<()> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", b as char)))
        }
    }

    fn digit(&mut self) -> Result<u8> {
        match self.peek() {
            Some(d @ b'0'..=b'2') => {
                self.pos += 1;
                Ok(d - b'0')
            }
            _ => Err(self.err("expected a digit 0, 1 or 2")),
        }
    }
}
