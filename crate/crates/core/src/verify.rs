//! Named check suites over every module, with reports that are identical
//! across runs for a fixed [`Config`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corecursive::{
    approx_h, carpet_membership, contraction_uniqueness, random_coalgebra, solve_interval, solve_square,
    CauchyChecker, Coalgebra,
};
use crate::error::{Error, Result};
use crate::gluing::{class_under, geometric_class, grid_to_word, GlueTable, Variant};
use crate::hutchinson::{cell_diameter, fixed_point_check, hausdorff_taxi, iterate, CellSet, DEFAULT_MAX_CELLS};
use crate::lattice::{
    geodesic_distance, lower_bound_check, nqm_check, scaling_sweep, stability_sweep, verify_bilipschitz,
    LatticeGraph, LatticeOracle, Sample,
};
use crate::plane::{verify_taxi_euclid_bilipschitz, Point2};
use crate::rat::{pow3, Rat};
use crate::squarespace::{boundary_grid, path_metric_m0, validate_sq1, validate_sq2, BoundaryPoint, PathMetricM0, TaxicabSquare};
use crate::ternary::{eval_ternary, to_ternary, Expansion};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Config {
    pub k_max: u32,
    /// Extra sampling levels for Hausdorff bounds beyond the set's own level.
    pub q_slack: u32,
    pub seed: u64,
    /// Deepest level of the bilipschitz sweep; levels above 3 are sampled.
    pub bilipschitz_k: u32,
}

impl Default for Config {
    fn default() -> Config {
        Config { k_max: crate::lattice::DEFAULT_K_MAX, q_slack: 3, seed: 0, bilipschitz_k: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Suite {
    Ternary,
    TaxiEuclid,
    Squarespace,
    Gluing,
    Nqm,
    Bilipschitz,
    Stability,
    Scaling,
    Corecursive,
    Cauchy,
    Hutchinson,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Ternary,
        Suite::TaxiEuclid,
        Suite::Squarespace,
        Suite::Gluing,
        Suite::Nqm,
        Suite::Bilipschitz,
        Suite::Stability,
        Suite::Scaling,
        Suite::Corecursive,
        Suite::Cauchy,
        Suite::Hutchinson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ternary => "ternary",
            Suite::TaxiEuclid => "taxi-euclid",
            Suite::Squarespace => "squarespace",
            Suite::Gluing => "gluing",
            Suite::Nqm => "nqm",
            Suite::Bilipschitz => "bilipschitz",
            Suite::Stability => "stability",
            Suite::Scaling => "scaling",
            Suite::Corecursive => "corecursive",
            Suite::Cauchy => "cauchy",
            Suite::Hutchinson => "hutchinson",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::parse(1, format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark} {}/{}: {}", self.suite, c.name, c.detail)?;
        }
        Ok(())
    }
}

struct Checks(Vec<CheckResult>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(CheckResult { name: name.into(), passed, detail: detail.into() });
    }
}

/// Runs one suite with the standard gluing tables.
pub fn run(suite: Suite, cfg: &Config) -> Result<SuiteReport> {
    run_with_tables(suite, cfg, &[GlueTable::standard(Variant::M), GlueTable::standard(Variant::N)])
}

/// Runs one suite; the gluing suite checks the given tables instead of the
/// standard ones.
pub fn run_with_tables(suite: Suite, cfg: &Config, tables: &[GlueTable]) -> Result<SuiteReport> {
    let mut c = Checks(Vec::new());
    match suite {
        Suite::Ternary => ternary(&mut c, cfg),
        Suite::TaxiEuclid => taxi_euclid(&mut c, cfg)?,
        Suite::Squarespace => squarespace(&mut c, cfg)?,
        Suite::Gluing => gluing(&mut c, tables),
        Suite::Nqm => nqm(&mut c, cfg)?,
        Suite::Bilipschitz => bilipschitz(&mut c, cfg)?,
        Suite::Stability => stability(&mut c, cfg)?,
        Suite::Scaling => scaling(&mut c, cfg)?,
        Suite::Corecursive => corecursive(&mut c, cfg)?,
        Suite::Cauchy => cauchy(&mut c, cfg)?,
        Suite::Hutchinson => hutchinson(&mut c, cfg)?,
    }
    Ok(SuiteReport { suite, checks: c.0 })
}

fn rng(cfg: &Config, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ (salt << 40))
}

fn random_unit<R: Rng>(rng: &mut R, max_denom: i128) -> Rat {
    let d = rng.random_range(1..=max_denom);
    Rat::new(rng.random_range(0..=d), d)
}

fn ternary(c: &mut Checks, cfg: &Config) {
    let mut rng = rng(cfg, 1);
    let max_denom = pow3(6) * 8;
    let mut bad = 0;
    for _ in 0..1000 {
        let x = random_unit(&mut rng, max_denom);
        for v in [Expansion::Low, Expansion::High] {
            if to_ternary(x, v).map(|s| eval_ternary(&s)) != Ok(x) {
                bad += 1;
            }
        }
    }
    c.push("round-trip", bad == 0, format!("1000 rationals, denominators <= {max_denom}, {bad} failures"));
    let third = Rat::new(1, 3);
    let lo = to_ternary(third, Expansion::Low).expect("in range");
    let hi = to_ternary(third, Expansion::High).expect("in range");
    c.push(
        "one-third",
        lo != hi && eval_ternary(&lo) == third && eval_ternary(&hi) == third,
        format!("{lo:?} and {hi:?} both evaluate to {}", eval_ternary(&lo)),
    );
}

fn taxi_euclid(c: &mut Checks, cfg: &Config) -> Result<()> {
    let mut rng = rng(cfg, 2);
    let mut pairs = Vec::with_capacity(1000);
    for _ in 0..1000 {
        let mut p = || Point2::new(random_unit(&mut rng, 1000), random_unit(&mut rng, 1000));
        pairs.push((p()?, p()?));
    }
    let bad = verify_taxi_euclid_bilipschitz(&pairs).iter().filter(|b| !b.passed).count();
    c.push("band", bad == 0, format!("1000 random pairs, {bad} outside the constant-2 band"));
    Ok(())
}

fn squarespace(c: &mut Checks, cfg: &Config) -> Result<()> {
    let depth = 3;
    let mut axioms = |name: String, sq1: crate::squarespace::AxiomReport, sq2: crate::squarespace::AxiomReport| {
        let detail = format!(
            "sq1 {} pairs {} violations, sq2 {} pairs {} violations",
            sq1.pairs_checked, sq1.violation_count, sq2.pairs_checked, sq2.violation_count
        );
        c.push(name, sq1.passed() && sq2.passed(), detail);
    };
    axioms("M0-path".into(), validate_sq1(&PathMetricM0, depth), validate_sq2(&PathMetricM0, depth));
    axioms("U0-taxicab".into(), validate_sq1(&TaxicabSquare, depth), validate_sq2(&TaxicabSquare, depth));
    for variant in [Variant::M, Variant::N] {
        for level in 1..=3 {
            let oracle = LatticeOracle::new(variant, level, depth, cfg.k_max)?;
            axioms(
                format!("{variant}-level-{level}"),
                validate_sq1(&oracle, depth),
                validate_sq2(&oracle, depth),
            );
        }
    }
    Ok(())
}

/// Compares the closure of each table with the geometric identification on
/// every word up to level 2 and every boundary tip at depth 1.
fn gluing(c: &mut Checks, tables: &[GlueTable]) {
    for table in tables {
        let variant = table.variant();
        for k in 1..=2u32 {
            let side = pow3(k) as u64;
            let words: Vec<_> = (0..side)
                .flat_map(|y| (0..side).map(move |x| (x, y)))
                .filter(|&(x, y)| crate::gluing::cell_kept(variant, x, y, k))
                .map(|(x, y)| grid_to_word(x, y, k))
                .collect();
            let tips = boundary_grid(1);
            let (checked, bad): (usize, usize) = words
                .par_iter()
                .map(|w| {
                    let bad = tips
                        .iter()
                        .filter(|t| class_under(table, w, t) != geometric_class(variant, w, t))
                        .count();
                    (tips.len(), bad)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            c.push(
                format!("{variant}-closure-level-{k}"),
                bad == 0,
                format!("{checked} addresses, {bad} classes differ from geometry"),
            );
        }
    }
}

fn nqm(c: &mut Checks, cfg: &Config) -> Result<()> {
    for k in 0..=3 {
        let r = nqm_check(k, Sample::All, cfg.seed, cfg.k_max)?;
        c.push(format!("N-level-{k}"), r.mismatches == 0, format!("{} pairs, {} mismatches", r.pairs, r.mismatches));
    }
    let r = nqm_check(4, Sample::Pairs(2000), cfg.seed, cfg.k_max)?;
    c.push("N-level-4-sampled", r.mismatches == 0, format!("{} pairs, {} mismatches", r.pairs, r.mismatches));
    let g = LatticeGraph::build(2, Variant::N, cfg.k_max)?;
    let a = g.vertex_address(2, 2);
    let b = g.vertex_address(7, 6);
    let bfs = geodesic_distance(&g, &a, &b)?;
    let formula = crate::lattice::nqm_formula(&a, &b)?;
    c.push(
        "worked-pair",
        bfs == Rat::ONE && formula == Rat::ONE,
        format!("h=5 v=4 at level 2: formula {formula}, lattice {bfs}"),
    );
    Ok(())
}

fn band_line(r: &crate::lattice::BandReport) -> String {
    let witness = r
        .max_witness
        .as_ref()
        .map(|w| format!(" at {} {}", w.a, w.b))
        .unwrap_or_default();
    format!("{} pairs, {} violations, max ratio {}{witness}", r.pairs, r.violations, r.max_ratio)
}

fn bilipschitz(c: &mut Checks, cfg: &Config) -> Result<()> {
    let top = cfg.bilipschitz_k;
    for k in 0..=top.min(3) {
        let r = verify_bilipschitz(k, Sample::All, cfg.seed, cfg.k_max)?;
        c.push(format!("M-level-{k}"), r.passed(), band_line(&r));
    }
    let sampled: Vec<u32> = (4..=top).collect();
    for &k in &sampled {
        let n = 10_000 / sampled.len();
        let r = verify_bilipschitz(k, Sample::Pairs(n), cfg.seed, cfg.k_max)?;
        c.push(format!("M-level-{k}-sampled"), r.passed(), band_line(&r));
    }
    for k in 1..=top.min(3) {
        let r = lower_bound_check(k, cfg.k_max)?;
        c.push(format!("M-level-{k}-segments"), r.passed(), band_line(&r));
    }
    let g = LatticeGraph::build(2, Variant::M, cfg.k_max)?;
    let hops = g.hops((3, 4), (6, 4));
    let ratio = Rat::int(hops as i128) * g.scale() / Rat::THIRD;
    c.push(
        "hole-pair",
        ratio == Rat::new(5, 3),
        format!("(1/3,4/9)-(2/3,4/9): lattice {}, ratio {ratio}", Rat::int(hops as i128) * g.scale()),
    );
    Ok(())
}

fn stability(c: &mut Checks, cfg: &Config) -> Result<()> {
    for variant in [Variant::M, Variant::N] {
        for k in 0..=2 {
            let r = stability_sweep(variant, k, 2, cfg.k_max)?;
            c.push(format!("{variant}-level-{k}"), r.passed(), format!("{} pairs, {} changed", r.pairs, r.failures));
        }
    }
    Ok(())
}

fn scaling(c: &mut Checks, cfg: &Config) -> Result<()> {
    for variant in [Variant::M, Variant::N] {
        for k in 0..=2 {
            let r = scaling_sweep(variant, k, cfg.k_max)?;
            c.push(format!("{variant}-level-{k}"), r.passed(), format!("{} pairs, {} off by scale", r.pairs, r.failures));
        }
    }
    Ok(())
}

fn corecursive(c: &mut Checks, cfg: &Config) -> Result<()> {
    let example = Coalgebra::parse("variant M\nz1 -> (1,2) z2\nz2 -> (0,2) z1\n")?;
    let sol = solve_square(&example)?;
    let want = [Point2::new(Rat::new(3, 8), Rat::ONE)?, Point2::new(Rat::new(1, 8), Rat::ONE)?];
    c.push(
        "two-state",
        sol.values == want,
        format!("z1 = {}, z2 = {}", sol.values[0], sol.values[1]),
    );

    let interval = Coalgebra::parse("variant interval delta 1/3\nr0 -> 1/3 r1\nr1 -> 2/3 r0\n")?;
    let r = solve_interval(&interval)?;
    c.push(
        "interval-two-cycle",
        r.values == [Rat::new(5, 8), Rat::new(7, 8)],
        format!("r0 = {}, r1 = {}", r.values[0], r.values[1]),
    );

    let mut rng = rng(cfg, 3);
    let mut solved = 0;
    let mut failures = Vec::new();
    for variant in [Variant::M, Variant::N] {
        for n in 1..=6 {
            for _ in 0..50 {
                let sys = random_coalgebra(variant, n, &mut rng);
                match solve_square(&sys) {
                    Ok(s) => {
                        solved += 1;
                        if variant == Variant::M && !s.values.iter().all(|p| carpet_membership(p).is_member()) {
                            failures.push(sys.to_text());
                        }
                    }
                    Err(e) => failures.push(format!("{e}")),
                }
            }
        }
    }
    c.push(
        "random-systems",
        failures.is_empty(),
        format!("{solved} systems solved with identities checked, {} failures", failures.len()),
    );

    let rep = contraction_uniqueness(&example, 5, 20, cfg.seed)?;
    c.push(
        "contraction",
        rep.passed(),
        format!("5 starts, 20 iterations, max deviation {} <= {}", rep.max_deviation, rep.bound),
    );
    let slow = Coalgebra::parse("variant interval delta 2/3\na -> 1/3 b\nb -> 0 a\n")?;
    let rep = contraction_uniqueness(&slow, 5, 20, cfg.seed)?;
    c.push(
        "contraction-delta-2/3",
        rep.passed(),
        format!("max deviation {} <= (2/3)^20", rep.max_deviation),
    );
    Ok(())
}

fn cauchy(c: &mut Checks, cfg: &Config) -> Result<()> {
    let k_max = 5.min(cfg.k_max);
    let checker = CauchyChecker::new(Variant::M, k_max, cfg.k_max)?;
    let mut rng = rng(cfg, 4);
    let systems: Vec<Coalgebra> = (0..100).map(|_| random_coalgebra(Variant::M, 3, &mut rng)).collect();
    let reports = systems
        .par_iter()
        .map(|s| (0..s.len()).map(|b| checker.check(s, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<_> = reports.iter().flatten().collect();
    let checks: usize = all.iter().map(|r| r.lattice_checks + r.taxicab_checks).sum();
    let bad: usize = all.iter().map(|r| r.violations.len()).sum();
    let worst = all.iter().map(|r| r.worst_fraction).fold(Rat::ZERO, Rat::max);
    c.push(
        "random-3-state",
        bad == 0,
        format!("100 systems, {checks} bounds, {bad} violations, worst gap {worst} of 2*3^-k"),
    );

    let x = BoundaryPoint::new(Rat::new(2, 9), Rat::ZERO)?;
    let y = BoundaryPoint::new(Rat::new(4, 9), Rat::ZERO)?;
    let sys = Coalgebra::boundary(Variant::M, &[x, y]);
    let bx = sys.index_of(&x.to_string()).expect("seed state");
    let by = sys.index_of(&y.to_string()).expect("seed state");
    let (hx, hy) = (approx_h(&sys, bx, 1)?, approx_h(&sys, by, 1)?);
    let g = LatticeGraph::build(1, Variant::M, cfg.k_max)?;
    let lattice = geodesic_distance(&g, &hx, &hy)?;
    let path = path_metric_m0(&x, &y);
    c.push(
        "non-short-witness",
        lattice == Rat::THIRD && path == Rat::new(2, 9),
        format!("h1{x} = {:?}, h1{y} = {:?}, lattice {lattice} > boundary {path}", hx.word(), hy.word()),
    );
    Ok(())
}

fn hutchinson(c: &mut Checks, cfg: &Config) -> Result<()> {
    for p in 0..=4 {
        let r = fixed_point_check(p, cfg.k_max)?;
        c.push(format!("sigma-{p}-cells"), r.passed(), format!("{} cells, matches lattice {}", r.cells, r.matches_lattice));
    }
    let u0 = CellSet::unit();
    let d0 = hausdorff_taxi(&u0, &iterate(&u0, 1, DEFAULT_MAX_CELLS)?, cfg.q_slack)?;
    for p in 1..=4 {
        let a = iterate(&u0, p, DEFAULT_MAX_CELLS)?;
        let b = iterate(&u0, p + 1, DEFAULT_MAX_CELLS)?;
        let d = hausdorff_taxi(&a, &b, p + cfg.q_slack)?;
        let bound = Rat::third_pow(p) * d0.upper + Rat::TWO * Rat::third_pow(p + cfg.q_slack);
        c.push(
            format!("contraction-{p}"),
            d.upper <= bound,
            format!("d in [{}, {}], bound {bound}", d.lower, d.upper),
        );
    }
    for p in 0..=4 {
        let set = iterate(&u0, p, DEFAULT_MAX_CELLS)?;
        let want = Rat::TWO * Rat::third_pow(p);
        let ok = set.cells().iter().all(|w| cell_diameter(w) == want);
        c.push(format!("diameter-{p}"), ok, format!("every cell has diameter {want}"));
    }
    Ok(())
}
