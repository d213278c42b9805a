//! Deterministic SVG output. Coordinates are integer lattice units with the
//! y axis flipped so that the origin sits bottom-left.

use std::fmt::Write as _;

use carpet_core::corecursive::Solution;
use carpet_core::rat::pow3;
use carpet_core::{Error, LatticeGraph, Point2, Result, Variant};

/// Largest carpet level drawn (8^6 squares).
pub const MAX_CARPET_LEVEL: u32 = 6;

/// Level of the cell backdrop behind solution markers.
const BACKDROP_LEVEL: u32 = 3;

fn header(min: i64, size: i64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{min} {min} {size} {size}\" width=\"729\" height=\"729\">\n"
    )
}

fn cells(out: &mut String, g: &LatticeGraph) {
    let n = g.side();
    out.push_str("<g fill=\"black\">\n");
    for (x, y) in g.kept_cells() {
        let _ = writeln!(out, "<rect x=\"{x}\" y=\"{}\" width=\"1\" height=\"1\"/>", n - 1 - y);
    }
    out.push_str("</g>\n");
}

/// The kept cells of the level-`p` carpet as filled unit squares.
pub fn carpet(p: u32) -> Result<String> {
    if p > MAX_CARPET_LEVEL {
        return Err(Error::LevelTooDeep { requested: p, max: MAX_CARPET_LEVEL });
    }
    let g = LatticeGraph::build(p, Variant::M, p)?;
    let mut out = header(0, g.side() as i64);
    cells(&mut out, &g);
    out.push_str("</svg>\n");
    Ok(out)
}

/// The level-`k` lattice as one stroke per edge.
pub fn lattice(k: u32, variant: Variant, k_max: u32) -> Result<String> {
    let g = LatticeGraph::build(k, variant, k_max)?;
    let n = g.side();
    let mut out = header(-1, n as i64 + 2);
    out.push_str("<g stroke=\"black\" stroke-width=\"0.1\" stroke-linecap=\"square\">\n");
    for ((x1, y1), (x2, y2)) in g.edges() {
        let _ = writeln!(out, "<line x1=\"{x1}\" y1=\"{}\" x2=\"{x2}\" y2=\"{}\"/>", n - y1, n - y2);
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Solution points as markers over the level-3 cells of `variant`.
pub fn solution(variant: Variant, sol: &Solution<Point2>) -> Result<String> {
    let g = LatticeGraph::build(BACKDROP_LEVEL, variant, BACKDROP_LEVEL)?;
    let n = pow3(BACKDROP_LEVEL);
    let mut out = header(0, n as i64);
    out.push_str("<g fill=\"lightgray\">\n");
    for (x, y) in g.kept_cells() {
        let _ = writeln!(out, "<rect x=\"{x}\" y=\"{}\" width=\"1\" height=\"1\"/>", n as u32 - 1 - y);
    }
    out.push_str("</g>\n<g fill=\"red\">\n");
    for (name, p) in sol.names.iter().zip(&sol.values) {
        let cx = (p.x * carpet_core::Rat::int(n)).to_f64();
        let cy = ((carpet_core::Rat::ONE - p.y) * carpet_core::Rat::int(n)).to_f64();
        let _ = writeln!(
            out,
            "<circle cx=\"{cx:.6}\" cy=\"{cy:.6}\" r=\"0.4\" data-state=\"{}\"/>",
            escape(name)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('"', "&quot;").replace('<', "&lt;").replace('>', "&gt;")
}
