//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.
//!
//! Where a value is derived rather than quoted, it is recomputed here by
//! code that does not go through the library's own path: a separate BFS on
//! a carpet built from digit tests, L1 distance on the full grid, and hand
//! solved linear systems.

use std::collections::VecDeque;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;

use carpet_core::corecursive::{
    approx_h, carpet_membership, contraction_uniqueness, random_coalgebra, solve_square, CauchyChecker,
};
use carpet_core::gluing::parse_address;
use carpet_core::hutchinson::{cell_diameter, hausdorff_taxi, iterate, DEFAULT_MAX_CELLS};
use carpet_core::lattice::{
    geodesic_distance, nqm_check, nqm_formula, scaling_sweep, stability_sweep, verify_bilipschitz, LatticeOracle,
    Sample,
};
use carpet_core::plane::verify_taxi_euclid_bilipschitz;
use carpet_core::squarespace::{path_metric_m0, validate_sq1, validate_sq2, PathMetricM0, TaxicabSquare};
use carpet_core::ternary::{eval_ternary, to_ternary, Expansion};
use carpet_core::{BoundaryPoint, CellSet, Coalgebra, CornerAddress, LatticeGraph, Point2, Rat, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn r(n: i128, d: i128) -> Rat {
    Rat::new(n, d)
}

fn pow3(k: u32) -> u64 {
    3u64.pow(k)
}

/// Carpet cell test by digits: no position has both digits equal to 1.
fn kept(mut x: u64, mut y: u64, k: u32) -> bool {
    for _ in 0..k {
        if x % 3 == 1 && y % 3 == 1 {
            return false;
        }
        x /= 3;
        y /= 3;
    }
    true
}

/// Independent carpet lattice: hop counts between grid vertices along
/// sides of kept cells.
struct Grid {
    n: u64,
    k: u32,
}

impl Grid {
    fn new(k: u32) -> Grid {
        Grid { n: pow3(k), k }
    }

    fn cell(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u64) < self.n && (y as u64) < self.n && kept(x as u64, y as u64, self.k)
    }

    fn vertex(&self, x: i64, y: i64) -> bool {
        self.cell(x, y) || self.cell(x - 1, y) || self.cell(x, y - 1) || self.cell(x - 1, y - 1)
    }

    fn vertices(&self) -> Vec<(i64, i64)> {
        let n = self.n as i64;
        (0..=n).flat_map(|y| (0..=n).map(move |x| (x, y))).filter(|&(x, y)| self.vertex(x, y)).collect()
    }

    fn bfs(&self, src: (i64, i64)) -> Vec<Option<u32>> {
        let w = self.n as i64 + 1;
        let mut dist = vec![None; (w * w) as usize];
        let mut q = VecDeque::from([src]);
        dist[(src.1 * w + src.0) as usize] = Some(0);
        while let Some((x, y)) = q.pop_front() {
            let d = dist[(y * w + x) as usize].unwrap();
            let steps = [
                ((x + 1, y), self.cell(x, y) || self.cell(x, y - 1)),
                ((x - 1, y), self.cell(x - 1, y) || self.cell(x - 1, y - 1)),
                ((x, y + 1), self.cell(x, y) || self.cell(x - 1, y)),
                ((x, y - 1), self.cell(x, y - 1) || self.cell(x - 1, y - 1)),
            ];
            for ((nx, ny), open) in steps {
                if open && nx >= 0 && ny >= 0 && nx < w && ny < w && dist[(ny * w + nx) as usize].is_none() {
                    dist[(ny * w + nx) as usize] = Some(d + 1);
                    q.push_back((nx, ny));
                }
            }
        }
        dist
    }
}

/// Grid position of a corner address, from its digits.
fn grid_of(a: &CornerAddress) -> (u64, u64) {
    let (mut x, mut y) = (0, 0);
    for c in a.word() {
        x = 3 * x + c.i as u64;
        y = 3 * y + c.j as u64;
    }
    (x + a.corner().0 as u64, y + a.corner().1 as u64)
}

fn criterion_1() -> Outcome {
    let mut pairs = 0usize;
    let mut bad = 0usize;
    for k in 0..=3 {
        let g = LatticeGraph::build(k, Variant::N, 6).unwrap();
        let n = pow3(k) as u32;
        let addrs: Vec<_> =
            (0..=n).flat_map(|y| (0..=n).map(move |x| (x, y))).map(|(x, y)| g.vertex_address(x, y)).collect();
        for (i, a) in addrs.iter().enumerate() {
            for b in &addrs[i + 1..] {
                let (ga, gb) = (grid_of(a), grid_of(b));
                let l1 = ga.0.abs_diff(gb.0) + ga.1.abs_diff(gb.1);
                pairs += 1;
                if nqm_formula(a, b).unwrap() != Rat::int(l1 as i128) * Rat::third_pow(k) {
                    bad += 1;
                }
            }
        }
        let lib = nqm_check(k, Sample::All, 0, 6).unwrap();
        bad += lib.mismatches;
    }
    let g = LatticeGraph::build(4, Variant::N, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let mut pick = || g.vertex_address(rng.random_range(0..=81), rng.random_range(0..=81));
        let (a, b) = (pick(), pick());
        let (ga, gb) = (grid_of(&a), grid_of(&b));
        let l1 = ga.0.abs_diff(gb.0) + ga.1.abs_diff(gb.1);
        pairs += 1;
        if nqm_formula(&a, &b).unwrap() != Rat::int(l1 as i128) * Rat::third_pow(4)
            || geodesic_distance(&g, &a, &b).unwrap() != nqm_formula(&a, &b).unwrap()
        {
            bad += 1;
        }
    }
    let lib = nqm_check(4, Sample::Pairs(2000), 0, 6).unwrap();
    bad += lib.mismatches;
    (bad == 0, format!("{pairs} pairs against grid L1 plus library BFS sweeps, {bad} mismatches"))
}

fn criterion_2() -> Outcome {
    let a = CornerAddress::from_address(&parse_address("N:(0,0)(2,2)@(0,0)", None).unwrap()).unwrap();
    let b = CornerAddress::from_address(&parse_address("N:(2,2)(0,0)@(1,0)", None).unwrap()).unwrap();
    let (ga, gb) = (grid_of(&a), grid_of(&b));
    let (h, v) = (ga.0.abs_diff(gb.0), ga.1.abs_diff(gb.1));
    let g = LatticeGraph::build(2, Variant::N, 6).unwrap();
    let bfs = geodesic_distance(&g, &a, &b).unwrap();
    let formula = nqm_formula(&a, &b).unwrap();
    (
        h == 5 && v == 4 && bfs == Rat::ONE && formula == Rat::ONE,
        format!("h = {h}, v = {v}, formula {formula}, BFS {bfs}"),
    )
}

/// Largest lattice/taxicab ratio over all vertex pairs, by the local BFS.
fn oracle_max_ratio(k: u32) -> (Rat, bool) {
    let grid = Grid::new(k);
    let verts = grid.vertices();
    let w = grid.n as i64 + 1;
    let mut best = Rat::ZERO;
    let mut in_band = true;
    for (i, &a) in verts.iter().enumerate() {
        let dist = grid.bfs(a);
        for &b in &verts[i + 1..] {
            let hops = dist[(b.1 * w + b.0) as usize].expect("carpet lattice is connected") as i128;
            let taxi = ((a.0 - b.0).abs() + (a.1 - b.1).abs()) as i128;
            in_band &= taxi <= hops && hops <= 2 * taxi;
            best = best.max(r(hops, taxi));
        }
    }
    (best, in_band)
}

fn criterion_3() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for k in 0..=3 {
        let rep = verify_bilipschitz(k, Sample::All, 0, 6).unwrap();
        let (oracle, band) = oracle_max_ratio(k);
        ok &= rep.passed() && band && rep.max_ratio == oracle;
        detail.push(format!("k={k} max {} (oracle {oracle})", rep.max_ratio));
    }
    let mut sampled = 0;
    for k in [4, 5] {
        let rep = verify_bilipschitz(k, Sample::Pairs(5000), 7, 6).unwrap();
        ok &= rep.passed() && rep.max_ratio <= Rat::TWO && rep.max_ratio >= Rat::ONE;
        sampled += rep.pairs;
        detail.push(format!("k={k} max {}", rep.max_ratio));
    }
    let grid = Grid::new(2);
    let hops = grid.bfs((3, 4))[(4 * 10 + 6) as usize].unwrap() as i128;
    let lib = LatticeGraph::build(2, Variant::M, 6).unwrap().hops((3, 4), (6, 4)) as i128;
    let ratio = r(hops, 9) / r(3, 9);
    ok &= ratio == r(5, 3) && lib == hops;
    detail.push(format!("{sampled} sampled pairs; hole pair ratio {ratio}"));
    (ok, detail.join(", "))
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut pairs = 0;
    for v in [Variant::M, Variant::N] {
        for k in 0..=2 {
            let rep = stability_sweep(v, k, 2, 6).unwrap();
            ok &= rep.passed();
            pairs += rep.pairs;
        }
    }
    (ok, format!("{pairs} pairs, each refined by 1 and 2 levels"))
}

fn criterion_5() -> Outcome {
    let mut ok = true;
    let mut names = Vec::new();
    let mut check = |name: String, a: carpet_core::squarespace::AxiomReport, b: carpet_core::squarespace::AxiomReport| {
        ok &= a.passed() && b.passed();
        names.push(format!("{name} {}+{}", a.pairs_checked, b.pairs_checked));
    };
    check("M0".into(), validate_sq1(&PathMetricM0, 3), validate_sq2(&PathMetricM0, 3));
    check("U0".into(), validate_sq1(&TaxicabSquare, 3), validate_sq2(&TaxicabSquare, 3));
    for v in [Variant::M, Variant::N] {
        for k in 1..=3 {
            let o = LatticeOracle::new(v, k, 3, 6).unwrap();
            check(format!("{v}{k}"), validate_sq1(&o, 3), validate_sq2(&o, 3));
        }
    }
    (ok, format!("pairs checked: {}", names.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut pairs = 0;
    for v in [Variant::M, Variant::N] {
        for k in 0..=2 {
            let rep = scaling_sweep(v, k, 6).unwrap();
            ok &= rep.passed();
            pairs += rep.pairs;
        }
    }
    // Spot check with the local BFS: the pair (0,0)-(3,3) at level 1 becomes
    // the same pair of lattice points inside cell (0,0) at level 2, where a
    // hop is a third as long.
    let one = Grid::new(1).bfs((0, 0))[3 * 4 + 3].unwrap();
    let two = Grid::new(2).bfs((0, 0))[3 * 10 + 3].unwrap();
    ok &= r(two as i128, 9) == r(one as i128, 3) / Rat::int(3);
    (ok, format!("{pairs} prefixed pairs at one third of the parent distance"))
}

fn criterion_7() -> Outcome {
    let two = Coalgebra::parse("variant M\nz1 -> (1,2) z2\nz2 -> (0,2) z1\n").unwrap();
    let sol = solve_square(&two).unwrap();
    // x1 = 1/3 + x2/3, x2 = x1/3  gives  x1 = 3/8;  y1 = y2 = 2/3 + y/3 = 1.
    let x1 = r(1, 3) / (Rat::ONE - r(1, 9));
    let want = [Point2::new(x1, Rat::ONE).unwrap(), Point2::new(x1 / Rat::int(3), Rat::ONE).unwrap()];
    let mut ok = sol.values == want && x1 == r(3, 8);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut solved = 0;
    for n in 1..=5 {
        for _ in 0..40 {
            let c = random_coalgebra(Variant::M, n, &mut rng);
            let s = solve_square(&c).unwrap();
            for (b, st) in c.states().iter().enumerate() {
                let carpet_core::corecursive::Label::Cell(m) = st.label else { unreachable!() };
                let z = s.values[b];
                let zn = s.values[st.next];
                ok &= z.x == Rat::new(m.i as i128, 3) + zn.x / Rat::int(3);
                ok &= z.y == Rat::new(m.j as i128, 3) + zn.y / Rat::int(3);
                ok &= carpet_membership(&z).is_member();
            }
            solved += 1;
        }
    }
    let rep = contraction_uniqueness(&two, 5, 20, 11).unwrap();
    ok &= rep.max_deviation <= Rat::TWO * Rat::third_pow(20);
    (
        ok,
        format!(
            "z1 = {}, z2 = {}; {solved} random systems satisfy the identity and lie in the carpet; contraction deviation {}",
            sol.values[0], sol.values[1], rep.max_deviation
        ),
    )
}

fn criterion_8() -> Outcome {
    let checker = CauchyChecker::new(Variant::M, 5, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bounds = 0;
    let mut ok = true;
    for _ in 0..100 {
        let c = random_coalgebra(Variant::M, 3, &mut rng);
        let sol = solve_square(&c).unwrap();
        for b in 0..3 {
            let rep = checker.check(&c, b).unwrap();
            ok &= rep.passed();
            bounds += rep.lattice_checks + rep.taxicab_checks;
            for k in 0..=5 {
                let h = approx_h(&c, b, k).unwrap();
                let (x, y) = grid_of(&h);
                let n = pow3(k) as i128;
                let gap = (r(x as i128, n) - sol.values[b].x).abs() + (r(y as i128, n) - sol.values[b].y).abs();
                ok &= gap <= Rat::TWO * Rat::third_pow(k);
            }
        }
    }
    let x = BoundaryPoint::new(r(2, 9), Rat::ZERO).unwrap();
    let y = BoundaryPoint::new(r(4, 9), Rat::ZERO).unwrap();
    let c = Coalgebra::boundary(Variant::M, &[x, y]);
    let hx = approx_h(&c, c.index_of("(2/9,0)").unwrap(), 1).unwrap();
    let hy = approx_h(&c, c.index_of("(4/9,0)").unwrap(), 1).unwrap();
    let grid = Grid::new(1);
    let (gx, gy) = (grid_of(&hx), grid_of(&hy));
    let hops = grid.bfs((gx.0 as i64, gx.1 as i64))[(gy.1 * 4 + gy.0) as usize].unwrap();
    let lattice = r(hops as i128, 3);
    let boundary = path_metric_m0(&x, &y);
    ok &= lattice == r(1, 3) && boundary == r(2, 9);
    (ok, format!("{bounds} bounds on 100 systems; witness lattice {lattice} > boundary {boundary}"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = 0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=729 * 8);
        let x = r(rng.random_range(0..=d), d);
        for v in [Expansion::Low, Expansion::High] {
            if eval_ternary(&to_ternary(x, v).unwrap()) != x {
                bad += 1;
            }
        }
    }
    let lo = to_ternary(r(1, 3), Expansion::Low).unwrap();
    let hi = to_ternary(r(1, 3), Expansion::High).unwrap();
    let ok = bad == 0 && lo != hi && eval_ternary(&lo) == r(1, 3) && eval_ternary(&hi) == r(1, 3);
    (ok, format!("1000 rationals, {bad} failures; 1/3 = {lo:?} = {hi:?}"))
}

fn criterion_10() -> Outcome {
    let mut ok = true;
    let u0 = CellSet::unit();
    for p in 0..=4 {
        let set = iterate(&u0, p, DEFAULT_MAX_CELLS).unwrap();
        let n = pow3(p);
        let mut mine: Vec<(u64, u64)> =
            (0..n).flat_map(|y| (0..n).map(move |x| (x, y))).filter(|&(x, y)| kept(x, y, p)).collect();
        let mut theirs: Vec<(u64, u64)> = set.grid_cells(p);
        mine.sort();
        theirs.sort();
        ok &= mine == theirs;
        ok &= set.cells().iter().all(|w| cell_diameter(w) == Rat::TWO * Rat::third_pow(p));
    }
    let d0 = hausdorff_taxi(&u0, &iterate(&u0, 1, DEFAULT_MAX_CELLS).unwrap(), 3).unwrap();
    let mut brackets = Vec::new();
    for p in 1..=4 {
        let a = iterate(&u0, p, DEFAULT_MAX_CELLS).unwrap();
        let b = iterate(&u0, p + 1, DEFAULT_MAX_CELLS).unwrap();
        let d = hausdorff_taxi(&a, &b, p + 3).unwrap();
        // The deepest hole of σ^(p+1) has centre 3^-p/6 away from its rim.
        let exact = Rat::third_pow(p) / Rat::int(6);
        ok &= d.lower <= exact && exact <= d.upper;
        ok &= d.upper <= Rat::third_pow(p) * d0.upper + Rat::TWO * Rat::third_pow(p + 3);
        brackets.push(format!("[{}, {}]", d.lower, d.upper));
    }
    (ok, format!("cells and diameters match for p <= 4; brackets {}", brackets.join(" ")))
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pt = || {
        let d = rng.random_range(1..=1000);
        let e = rng.random_range(1..=1000);
        Point2::new(r(rng.random_range(0..=d), d), r(rng.random_range(0..=e), e)).unwrap()
    };
    let pairs: Vec<_> = (0..1000).map(|_| (pt(), pt())).collect();
    let lib_ok = verify_taxi_euclid_bilipschitz(&pairs).iter().all(|c| c.passed);
    let four = Rat::int(4);
    let oracle_ok = pairs.iter().all(|(p, q)| {
        let (dx, dy) = ((p.x - q.x).abs(), (p.y - q.y).abs());
        let t2 = (dx + dy) * (dx + dy);
        let e2 = dx * dx + dy * dy;
        t2 <= four * e2 && e2 <= four * t2
    });
    (lib_ok && oracle_ok, "1000 random pairs inside the squared band".into())
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_carpet")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("two.txt");
    std::fs::write(&file, "variant M\nz1 -> (1,2) z2\nz2 -> (0,2) z1\n").unwrap();
    let file = file.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["render", "carpet", "3"],
        vec!["render", "lattice", "2", "M"],
        vec!["render", "solution", file],
        vec!["--seed", "42", "verify", "all"],
        vec!["--seed", "42", "--format", "json-lines", "verify", "bilipschitz"],
    ];
    let mut ok = true;
    for args in &runs {
        let first = run_cli(args);
        let second = run_cli(args);
        ok &= first == second && first.0 == 0 && !first.1.is_empty();
    }
    (ok, format!("{} commands byte-identical across two runs", runs.len()))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("nqm closed form equals lattice distance", criterion_1),
        ("worked N pair h=5 v=4 has distance 1", criterion_2),
        ("bilipschitz band on M lattices", criterion_3),
        ("distance stable under refinement", criterion_4),
        ("sq1/sq2 hold for M0, U0 and glued levels", criterion_5),
        ("per-copy scaling by 1/3", criterion_6),
        ("corecursive solvers", criterion_7),
        ("Cauchy rate of approximants", criterion_8),
        ("ternary round trip", criterion_9),
        ("Hutchinson iteration", criterion_10),
        ("taxicab/Euclid constant 2", criterion_11),
        ("determinism", criterion_12),
    ];
    let mut failed = 0;
    for (n, (title, f)) in criteria.iter().enumerate() {
        let (ok, detail) = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !ok {
            failed += 1;
        }
        println!("{} criterion {:>2} {title}: {detail}", if ok { "PASS" } else { "FAIL" }, n + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
