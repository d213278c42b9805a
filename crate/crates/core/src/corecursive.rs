//! Finite guarded equation systems and their exact solutions.
//!
//! A coalgebra assigns every state a label and a successor. Over the
//! interval algebra the label is a rational `ξ` and the solution satisfies
//! `r_b = ξ_b + δ·r_next(b)`; over the square algebras the label is a cell
//! and `z_b = shrink(m_b) + z_next(b)/3`. Finitely many states make every
//! orbit eventually periodic, so solutions are closed-form rationals.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gluing::{alpha, normalize, Address, Cell, GlueTable, Variant};
use crate::lattice::{CornerAddress, LatticeGraph};
use crate::plane::{taxicab, Point2};
use crate::rat::Rat;
use crate::squarespace::{side_embedding, BoundaryPoint};
use crate::ternary::{to_ternary, Expansion, TernaryStream};

/// Which algebra a coalgebra is solved in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kind {
    Interval { delta: Rat },
    Square(Variant),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Label {
    Xi(Rat),
    Cell(Cell),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct State {
    pub name: String,
    pub label: Label,
    pub next: usize,
    /// Set for states of a boundary coalgebra, where the state is itself a
    /// point of `M₀`.
    pub boundary: Option<BoundaryPoint>,
}

/// A finite, total, deterministic coalgebra.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coalgebra {
    kind: Kind,
    states: Vec<State>,
}

impl Coalgebra {
    /// Builds from `(name, label, successor name)` triples.
    pub fn new<S: AsRef<str>>(kind: Kind, entries: &[(S, Label, S)]) -> Result<Coalgebra> {
        let mut index = HashMap::new();
        for (n, (name, _, _)) in entries.iter().enumerate() {
            if index.insert(name.as_ref(), n).is_some() {
                return Err(Error::Coalgebra(format!("duplicate state `{}`", name.as_ref())));
            }
        }
        let states = entries
            .iter()
            .map(|(name, label, next)| {
                let next = *index.get(next.as_ref()).ok_or_else(|| {
                    Error::Coalgebra(format!("`{}` points to unknown state `{}`", name.as_ref(), next.as_ref()))
                })?;
                check_label(kind, label).map_err(Error::Coalgebra)?;
                Ok(State { name: name.as_ref().to_string(), label: *label, next, boundary: None })
            })
            .collect::<Result<Vec<_>>>()?;
        if states.is_empty() {
            return Err(Error::Coalgebra("no states".into()));
        }
        if let Kind::Interval { delta } = kind {
            if delta < Rat::ZERO || delta >= Rat::ONE {
                return Err(Error::Coalgebra(format!("delta {delta} outside [0,1)")));
            }
        }
        Ok(Coalgebra { kind, states })
    }

    /// The boundary dynamics `β: B → M⊗B` generated by `seeds`: each point
    /// steps to its least side embedding. States are named by coordinates.
    pub fn boundary(variant: Variant, seeds: &[BoundaryPoint]) -> Coalgebra {
        let mut index: BTreeMap<BoundaryPoint, usize> = BTreeMap::new();
        let mut points = Vec::new();
        let mut todo: Vec<BoundaryPoint> = seeds.to_vec();
        let mut steps = Vec::new();
        while let Some(p) = todo.pop() {
            if index.contains_key(&p) {
                continue;
            }
            index.insert(p, points.len());
            points.push(p);
            let (cell, q) = side_embedding(&p);
            steps.push((cell, q));
            todo.push(q);
        }
        let states = points
            .iter()
            .zip(&steps)
            .map(|(p, (cell, q))| State {
                name: p.to_string(),
                label: Label::Cell(*cell),
                next: index[q],
                boundary: Some(*p),
            })
            .collect();
        Coalgebra { kind: Kind::Square(variant), states }
    }

    /// Reads the line format: a `variant M|N|interval delta <rat>` header,
    /// then `<name> -> <label> <next>` per state. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Coalgebra> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hn, header) = lines.next().ok_or_else(|| Error::line(1, "missing `variant` header"))?;
        let kind = parse_header(header).map_err(|m| Error::line(hn, m))?;

        let mut rows: Vec<(usize, &str, Label, &str)> = Vec::new();
        let mut seen = HashMap::new();
        for (n, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [name, "->", label, next] = toks[..] else {
                return Err(Error::line(n, "expected `<name> -> <label> <next>`"));
            };
            let label = parse_label(label).map_err(|m| Error::line(n, m))?;
            check_label(kind, &label).map_err(|m| Error::line(n, m))?;
            if let Some(first) = seen.insert(name, n) {
                return Err(Error::line(n, format!("duplicate state `{name}` (first on line {first})")));
            }
            rows.push((n, name, label, next));
        }
        if rows.is_empty() {
            return Err(Error::line(hn, "no states"));
        }
        for (n, _, _, next) in &rows {
            if !seen.contains_key(next) {
                return Err(Error::line(*n, format!("unknown successor `{next}`")));
            }
        }
        let entries: Vec<_> = rows.iter().map(|(_, name, label, next)| (*name, *label, *next)).collect();
        Coalgebra::new(kind, &entries)
    }

    /// Inverse of [`Coalgebra::parse`].
    pub fn to_text(&self) -> String {
        let mut s = match self.kind {
            Kind::Interval { delta } => format!("variant interval delta {delta}\n"),
            Kind::Square(v) => format!("variant {v}\n"),
        };
        for st in &self.states {
            let label = match st.label {
                Label::Xi(x) => x.to_string(),
                Label::Cell(c) => c.to_string(),
            };
            let _ = writeln!(s, "{} -> {} {}", st.name, label, self.states[st.next].name);
        }
        s
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    /// `b, next(b), …` with `k + 1` entries.
    pub fn orbit(&self, b: usize, k: u32) -> Vec<usize> {
        let mut out = Vec::with_capacity(k as usize + 1);
        let mut cur = b;
        out.push(cur);
        for _ in 0..k {
            cur = self.states[cur].next;
            out.push(cur);
        }
        out
    }

    fn square_variant(&self) -> Result<Variant> {
        match self.kind {
            Kind::Square(v) => Ok(v),
            Kind::Interval { .. } => Err(Error::VariantMismatch("expected a square coalgebra".into())),
        }
    }

    fn cell(&self, b: usize) -> Cell {
        match self.states[b].label {
            Label::Cell(c) => c,
            Label::Xi(_) => unreachable!("labels are checked against the kind"),
        }
    }
}

fn parse_header(header: &str) -> std::result::Result<Kind, String> {
    let toks: Vec<&str> = header.split_whitespace().collect();
    match toks[..] {
        ["variant", "interval", "delta", d] => {
            let delta: Rat = d.parse().map_err(|e: Error| e.to_string())?;
            if delta < Rat::ZERO || delta >= Rat::ONE {
                return Err(format!("delta {delta} outside [0,1)"));
            }
            Ok(Kind::Interval { delta })
        }
        ["variant", v] => v.parse().map(Kind::Square).map_err(|e: Error| e.to_string()),
        _ => Err("expected `variant M`, `variant N` or `variant interval delta <rat>`".into()),
    }
}

fn parse_label(tok: &str) -> std::result::Result<Label, String> {
    if let Some(inner) = tok.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
        return match inner.as_bytes() {
            [a @ b'0'..=b'2', b',', b @ b'0'..=b'2'] => Ok(Label::Cell(Cell::new(a - b'0', b - b'0'))),
            _ => Err(format!("bad cell `{tok}`")),
        };
    }
    tok.parse().map(Label::Xi).map_err(|e: Error| format!("bad label `{tok}`: {e}"))
}

fn check_label(kind: Kind, label: &Label) -> std::result::Result<(), String> {
    match (kind, label) {
        (Kind::Interval { delta }, Label::Xi(xi)) => {
            if *xi < Rat::ZERO || *xi > Rat::ONE - delta {
                return Err(format!("ξ = {xi} outside [0, {}]", Rat::ONE - delta));
            }
            Ok(())
        }
        (Kind::Square(v), Label::Cell(c)) => {
            if !v.allows(*c) {
                return Err(format!("cell {c} is not allowed under {v}"));
            }
            Ok(())
        }
        (Kind::Interval { .. }, Label::Cell(_)) => Err("interval systems take rational labels".into()),
        (Kind::Square(_), Label::Xi(_)) => Err("square systems take cell labels".into()),
    }
}

/// Exact value per state, in state order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Solution<T> {
    pub names: Vec<String>,
    pub values: Vec<T>,
}

impl<T> Solution<T> {
    pub fn get(&self, name: &str) -> Option<&T> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }
}

/// Solves `r_b = ξ_b + δ·r_next(b)` for every state. Each cycle is summed as
/// a geometric series and the tails are filled in backwards.
fn solve_linear(xi: &[Rat], next: &[usize], delta: Rat) -> Result<Vec<Rat>> {
    let n = xi.len();
    let mut value: Vec<Option<Rat>> = vec![None; n];
    let mut on_path = vec![usize::MAX; n];
    for start in 0..n {
        if value[start].is_some() {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        while value[cur].is_none() && on_path[cur] == usize::MAX {
            on_path[cur] = path.len();
            path.push(cur);
            cur = next[cur];
        }
        let mut tail_len = path.len();
        if value[cur].is_none() {
            // `cur` closes a cycle at position `on_path[cur]`.
            let cycle = &path[on_path[cur]..];
            let mut sum = Rat::ZERO;
            let mut weight = Rat::ONE;
            for &s in cycle {
                sum = sum.checked_add(weight.checked_mul(xi[s])?)?;
                weight = weight.checked_mul(delta)?;
            }
            let head = sum.checked_div(Rat::ONE.checked_sub(weight)?)?;
            value[cycle[0]] = Some(head);
            for &s in cycle[1..].iter().rev() {
                let succ = value[next[s]].expect("successor solved");
                value[s] = Some(xi[s].checked_add(delta.checked_mul(succ)?)?);
            }
            tail_len = on_path[cur];
        }
        for &s in path[..tail_len].iter().rev() {
            let succ = value[next[s]].expect("successor solved");
            value[s] = Some(xi[s].checked_add(delta.checked_mul(succ)?)?);
        }
        for &s in &path {
            on_path[s] = usize::MAX;
        }
    }
    Ok(value.into_iter().map(|v| v.expect("all states solved")).collect())
}

fn successors(c: &Coalgebra) -> Vec<usize> {
    c.states.iter().map(|s| s.next).collect()
}

/// Exact solution in the interval algebra, checked against its defining
/// identity before returning.
pub fn solve_interval(c: &Coalgebra) -> Result<Solution<Rat>> {
    let Kind::Interval { delta } = c.kind else {
        return Err(Error::VariantMismatch("expected an interval coalgebra".into()));
    };
    let xi: Vec<Rat> = c
        .states
        .iter()
        .map(|s| match s.label {
            Label::Xi(x) => x,
            Label::Cell(_) => unreachable!("labels are checked against the kind"),
        })
        .collect();
    let next = successors(c);
    let values = solve_linear(&xi, &next, delta)?;
    for b in 0..c.len() {
        if values[b] != xi[b] + delta * values[next[b]] {
            return Err(Error::Certification(format!("identity fails at `{}`", c.states[b].name)));
        }
    }
    Ok(Solution { names: c.states.iter().map(|s| s.name.clone()).collect(), values })
}

/// Exact solution in the unit square (`N`) or the carpet (`M`).
///
/// The system splits into two interval systems with `ξ = i/3` and `j/3` and
/// `δ = 1/3`. Every value is checked against `z_b = shrink(m_b) + z_next/3`,
/// and under `M` also certified to lie in the carpet.
pub fn solve_square(c: &Coalgebra) -> Result<Solution<Point2>> {
    let variant = c.square_variant()?;
    let next = successors(c);
    let cells: Vec<Cell> = (0..c.len()).map(|b| c.cell(b)).collect();
    let xs: Vec<Rat> = cells.iter().map(|m| Rat::new(m.i as i128, 3)).collect();
    let ys: Vec<Rat> = cells.iter().map(|m| Rat::new(m.j as i128, 3)).collect();
    let x = solve_linear(&xs, &next, Rat::THIRD)?;
    let y = solve_linear(&ys, &next, Rat::THIRD)?;
    let values: Vec<Point2> = x
        .into_iter()
        .zip(y)
        .map(|(x, y)| Point2::new(x, y))
        .collect::<Result<_>>()?;
    for b in 0..c.len() {
        let name = &c.states[b].name;
        if values[b] != alpha(cells[b], &values[next[b]]) {
            return Err(Error::Certification(format!("identity fails at `{name}`")));
        }
        if variant == Variant::M && !carpet_membership(&values[b]).is_member() {
            return Err(Error::Certification(format!("value of `{name}` is not in the carpet")));
        }
    }
    Ok(Solution { names: c.states.iter().map(|s| s.name.clone()).collect(), values })
}

/// CSV `state,x,y[,member],verified` with exact fractions. `member` is
/// present for variant `M`.
pub fn solution_csv(c: &Coalgebra, sol: &Solution<Point2>) -> String {
    let with_member = c.kind == Kind::Square(Variant::M);
    let mut s = String::from(if with_member { "state,x,y,member,verified\n" } else { "state,x,y,verified\n" });
    for (name, p) in sol.names.iter().zip(&sol.values) {
        let _ = write!(s, "{name},{},{}", p.x, p.y);
        if with_member {
            let _ = write!(s, ",{}", carpet_membership(p).is_member());
        }
        s.push_str(",true\n");
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Membership {
    Member,
    NonMember,
}

impl Membership {
    pub fn is_member(self) -> bool {
        self == Membership::Member
    }
}

fn expansions(x: Rat) -> Vec<TernaryStream> {
    let lo = to_ternary(x, Expansion::Low).expect("coordinate in [0,1]");
    let hi = to_ternary(x, Expansion::High).expect("coordinate in [0,1]");
    if lo == hi { vec![lo] } else { vec![lo, hi] }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Decides whether `p` lies in the carpet: some choice of base-3 expansions
/// of the two coordinates never puts digit 1 in both at the same position.
///
/// Both streams are eventually periodic, so checking the longer preperiod
/// plus the lcm of the periods covers every position.
pub fn carpet_membership(p: &Point2) -> Membership {
    for sx in expansions(p.x) {
        for sy in &expansions(p.y) {
            let (px, py) = (sx.period().len(), sy.period().len());
            let horizon = sx.preperiod().len().max(sy.preperiod().len()) + px / gcd(px, py) * py;
            if (0..horizon).all(|k| !(sx.digit(k) == 1 && sy.digit(k) == 1)) {
                return Membership::Member;
            }
        }
    }
    Membership::NonMember
}

/// `h_k(b)`: the first `k` labels of the orbit with tip `(0,0)`.
///
/// For a boundary coalgebra the level-`k` point `word ⊗ b_k` is normalized
/// first, so the word is the least one naming that point.
pub fn approx_h(c: &Coalgebra, b: usize, k: u32) -> Result<CornerAddress> {
    let variant = c.square_variant()?;
    let orbit = c.orbit(b, k);
    let mut word: Vec<Cell> = orbit[..k as usize].iter().map(|&s| c.cell(s)).collect();
    if let Some(tip) = c.states[orbit[k as usize]].boundary {
        let raw = Address::raw(variant, word, tip)?;
        word = normalize(&GlueTable::standard(variant), &raw).word().to_vec();
    }
    CornerAddress::new(variant, word, (0, 0))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CauchyViolation {
    pub state: String,
    /// `"lattice"` for `d(h_k, h_j)`, `"taxicab"` for the gap to the solution.
    pub kind: &'static str,
    pub k: u32,
    pub j: u32,
    pub gap: Rat,
    pub bound: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CauchyReport {
    pub k_max: u32,
    pub lattice_checks: usize,
    pub taxicab_checks: usize,
    /// Largest `gap / (2·3^-k)` seen.
    pub worst_fraction: Rat,
    pub violations: Vec<CauchyViolation>,
}

impl CauchyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lattices for levels `0..=k_max`, shared across many Cauchy checks.
pub struct CauchyChecker {
    graphs: Vec<LatticeGraph>,
    k_max: u32,
}

impl CauchyChecker {
    pub fn new(variant: Variant, k_max: u32, level_cap: u32) -> Result<CauchyChecker> {
        let graphs = (0..=k_max).map(|k| LatticeGraph::build(k, variant, level_cap)).collect::<Result<_>>()?;
        Ok(CauchyChecker { graphs, k_max })
    }

    /// Checks `d(refine(h_k, j-k), h_j) ≤ 2·3^-k` on the level-`j` lattice
    /// for `k < j ≤ k_max`, and `|eval h_k − z_b|₁ ≤ 2·3^-k` for `k ≤ k_max`.
    pub fn check(&self, c: &Coalgebra, b: usize) -> Result<CauchyReport> {
        let sol = solve_square(c)?;
        let h: Vec<CornerAddress> = (0..=self.k_max).map(|k| approx_h(c, b, k)).collect::<Result<_>>()?;
        let name = &c.states[b].name;
        let mut report = CauchyReport {
            k_max: self.k_max,
            lattice_checks: 0,
            taxicab_checks: 0,
            worst_fraction: Rat::ZERO,
            violations: Vec::new(),
        };
        let record = |report: &mut CauchyReport, kind, k: u32, j, gap: Rat| {
            let bound = Rat::TWO * Rat::third_pow(k);
            report.worst_fraction = report.worst_fraction.max(gap / bound);
            if gap > bound {
                report.violations.push(CauchyViolation { state: name.clone(), kind, k, j, gap, bound });
            }
        };
        for j in 1..=self.k_max {
            let g = &self.graphs[j as usize];
            let (tx, ty) = h[j as usize].grid();
            let dist = g.bfs(g.id(tx as u32, ty as u32));
            for k in 0..j {
                let (sx, sy) = h[k as usize].refine(j - k).grid();
                let hops = dist[g.id(sx as u32, sy as u32)];
                if hops == u32::MAX {
                    return Err(Error::Certification(format!("h_{k} and h_{j} are disconnected")));
                }
                report.lattice_checks += 1;
                record(&mut report, "lattice", k, j, Rat::int(hops as i128) * g.scale());
            }
        }
        for k in 0..=self.k_max {
            report.taxicab_checks += 1;
            let gap = taxicab(&h[k as usize].eval(), &sol.values[b]);
            record(&mut report, "taxicab", k, k, gap);
        }
        Ok(report)
    }
}

/// One-shot [`CauchyChecker::check`].
pub fn cauchy_rate_check(c: &Coalgebra, b: usize, k_max: u32, level_cap: u32) -> Result<CauchyReport> {
    CauchyChecker::new(c.square_variant()?, k_max, level_cap)?.check(c, b)
}

/// A random `M`- or `N`-coalgebra with states `s0…s{n-1}`.
pub fn random_coalgebra<R: Rng>(variant: Variant, n: usize, rng: &mut R) -> Coalgebra {
    let cells: Vec<Cell> = variant.cells().collect();
    let states = (0..n)
        .map(|i| State {
            name: format!("s{i}"),
            label: Label::Cell(*cells.choose(rng).expect("nonempty")),
            next: rng.random_range(0..n),
            boundary: None,
        })
        .collect();
    Coalgebra { kind: Kind::Square(variant), states }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ContractionReport {
    pub trials: usize,
    pub iters: u32,
    pub bound: Rat,
    pub max_deviation: Rat,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.bound
    }
}

fn random_unit<R: Rng>(rng: &mut R) -> Rat {
    let d = rng.random_range(1..=16);
    Rat::new(rng.random_range(0..=d), d)
}

/// Largest deviation from the exact solution after each of `iters`
/// applications of `Φ(f) = α ∘ Ff ∘ e`, from the given start. Interval starts
/// use the `x` coordinate only.
pub fn contraction_trace(c: &Coalgebra, start: &[Point2], iters: u32) -> Result<Vec<Rat>> {
    let next = successors(c);
    let mut out = Vec::with_capacity(iters as usize);
    match c.kind {
        Kind::Interval { delta } => {
            let exact = solve_interval(c)?.values;
            let mut f: Vec<Rat> = start.iter().map(|p| p.x).collect();
            for _ in 0..iters {
                f = (0..c.len())
                    .map(|b| match c.states[b].label {
                        Label::Xi(xi) => xi + delta * f[next[b]],
                        Label::Cell(_) => unreachable!("labels are checked against the kind"),
                    })
                    .collect();
                out.push(f.iter().zip(&exact).map(|(a, e)| (*a - *e).abs()).fold(Rat::ZERO, Rat::max));
            }
        }
        Kind::Square(_) => {
            let exact = solve_square(c)?.values;
            let mut f = start.to_vec();
            for _ in 0..iters {
                f = (0..c.len()).map(|b| alpha(c.cell(b), &f[next[b]])).collect();
                out.push(f.iter().zip(&exact).map(|(a, e)| taxicab(a, e)).fold(Rat::ZERO, Rat::max));
            }
        }
    }
    Ok(out)
}

/// Runs [`contraction_trace`] from `trials` random starts and compares the
/// final deviation with the contraction bound: `2·3^-iters` in the square
/// (taxicab diameter 2), `δ^iters` in the interval (diameter 1).
pub fn contraction_uniqueness(c: &Coalgebra, trials: usize, iters: u32, seed: u64) -> Result<ContractionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = match c.kind {
        Kind::Interval { delta } => delta.checked_pow(iters)?,
        Kind::Square(_) => Rat::TWO * Rat::third_pow(iters),
    };
    let mut max_deviation = Rat::ZERO;
    for _ in 0..trials {
        let start: Vec<Point2> = (0..c.len())
            .map(|_| Point2::new(random_unit(&mut rng), random_unit(&mut rng)))
            .collect::<Result<_>>()?;
        let trace = contraction_trace(c, &start, iters)?;
        if let Some(last) = trace.last() {
            max_deviation = max_deviation.max(*last);
        }
    }
    Ok(ContractionReport { trials, iters, bound, max_deviation })
}
