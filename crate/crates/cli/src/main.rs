use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use carpet_core::corecursive::{carpet_membership, solution_csv, solve_interval, solve_square, Kind};
use carpet_core::gluing::parse_address;
use carpet_core::hutchinson::{hausdorff_taxi, iterate, DEFAULT_MAX_CELLS};
use carpet_core::lattice::DEFAULT_K_MAX;
use carpet_core::verify::{self, Config, Suite};
use carpet_core::{CellSet, Coalgebra, Error, GlueTable, LatticeGraph, Variant};

mod render;

#[derive(Parser)]
#[command(name = "carpet", version, about = "Exact geometry of the Sierpinski carpet")]
struct Cli {
    /// Deepest lattice level any command may build.
    #[arg(long, global = true, default_value_t = DEFAULT_K_MAX)]
    k_max: u32,
    /// Seed for sampled sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lattice distance between two addresses such as `(1,0)(0,1)@(0,0)`.
    Distance { variant: Variant, level: u32, a: String, b: String },
    /// Solve a coalgebra file exactly.
    Solve { file: PathBuf },
    /// Write an SVG picture.
    Render {
        #[command(subcommand)]
        what: RenderCmd,
        /// Output path; stdout when omitted.
        #[arg(short, long, global = true)]
        out: Option<PathBuf>,
    },
    /// Run a check suite, or `all`.
    Verify {
        suite: String,
        /// Deepest level of the bilipschitz sweep.
        #[arg(long, default_value_t = 5)]
        k: u32,
        /// Extra sampling levels for Hausdorff bounds.
        #[arg(long, default_value_t = 3)]
        q_slack: u32,
        /// Replacement gluing table for the gluing suite.
        #[arg(long)]
        glue_table: Option<PathBuf>,
    },
    /// Iterate the carpet's function system or bound Hausdorff distances.
    Hutchinson {
        #[command(subcommand)]
        what: HutchCmd,
    },
}

#[derive(Subcommand)]
enum RenderCmd {
    Carpet { p: u32 },
    Lattice { k: u32, variant: Variant },
    Solution { file: PathBuf },
}

#[derive(Subcommand)]
enum HutchCmd {
    /// Print `σ^p(U₀)` as a cell-set file.
    Iterate {
        p: u32,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Bracket the taxicab Hausdorff distance of two cell sets. Each operand is
    /// a cell-set file or an integer `p` standing for `σ^p(U₀)`.
    Hausdorff {
        a: String,
        b: String,
        #[arg(long, default_value_t = 5)]
        q: u32,
    },
}

enum Failure {
    Core(Error),
    Io(PathBuf, io::Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Io(path, e)) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_resource_guard() => 3,
        Error::Overflow => 3,
        Error::Certification(_) => 1,
        _ => 2,
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(p.to_path_buf(), e)),
        None => {
            let _ = io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.cmd {
        Cmd::Distance { variant, level, a, b } => distance(cli, *variant, *level, a, b),
        Cmd::Solve { file } => solve(cli, file),
        Cmd::Render { what, out } => {
            let svg = match what {
                RenderCmd::Carpet { p } => render::carpet(*p)?,
                RenderCmd::Lattice { k, variant } => render::lattice(*k, *variant, cli.k_max)?,
                RenderCmd::Solution { file } => {
                    let c = Coalgebra::parse(&read(file)?)?;
                    let Kind::Square(variant) = c.kind() else {
                        return Err(Error::VariantMismatch("only square systems can be drawn".into()).into());
                    };
                    render::solution(variant, &solve_square(&c)?)?
                }
            };
            emit(out.as_deref(), &svg)
        }
        Cmd::Verify { suite, k, q_slack, glue_table } => verify_cmd(cli, suite, *k, *q_slack, glue_table.as_deref()),
        Cmd::Hutchinson { what } => hutchinson(cli, what),
    }
}

#[derive(Serialize)]
struct DistanceRow<'a> {
    a: &'a str,
    b: &'a str,
    level: u32,
    distance: String,
    approx: f64,
}

fn distance(cli: &Cli, variant: Variant, level: u32, a: &str, b: &str) -> Outcome {
    let pa = parse_address(a, Some(variant))?;
    let pb = parse_address(b, Some(variant))?;
    if pa.variant() != variant || pb.variant() != variant {
        return Err(Error::VariantMismatch(format!("addresses must use variant {variant}")).into());
    }
    let g = LatticeGraph::build(level, variant, cli.k_max)?;
    let d = g.address_distance(&pa, &pb)?;
    let (sa, sb) = (pa.to_string(), pb.to_string());
    let text = match cli.format {
        Format::Csv => format!("distance,approx\n{d},{:.6}\n", d.to_f64()),
        Format::JsonLines => json_line(&DistanceRow { a: &sa, b: &sb, level, distance: d.to_string(), approx: d.to_f64() }),
    };
    emit(None, &text)
}

#[derive(Serialize)]
struct SolveRow<'a> {
    state: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    member: Option<bool>,
    verified: bool,
}

fn solve(cli: &Cli, file: &Path) -> Outcome {
    let c = Coalgebra::parse(&read(file)?)?;
    let text = match c.kind() {
        Kind::Interval { .. } => {
            let sol = solve_interval(&c)?;
            match cli.format {
                Format::Csv => {
                    let mut s = String::from("state,value,verified\n");
                    for (n, v) in sol.names.iter().zip(&sol.values) {
                        s.push_str(&format!("{},{v},true\n", csv_field(n)));
                    }
                    s
                }
                Format::JsonLines => sol
                    .names
                    .iter()
                    .zip(&sol.values)
                    .map(|(n, v)| {
                        json_line(&SolveRow { state: n, value: Some(v.to_string()), x: None, y: None, member: None, verified: true })
                    })
                    .collect(),
            }
        }
        Kind::Square(variant) => {
            let sol = solve_square(&c)?;
            match cli.format {
                Format::Csv => solution_csv(&c, &sol),
                Format::JsonLines => sol
                    .names
                    .iter()
                    .zip(&sol.values)
                    .map(|(n, p)| {
                        json_line(&SolveRow {
                            state: n,
                            value: None,
                            x: Some(p.x.to_string()),
                            y: Some(p.y.to_string()),
                            member: (variant == Variant::M).then(|| carpet_membership(p).is_member()),
                            verified: true,
                        })
                    })
                    .collect(),
            }
        }
    };
    emit(None, &text)
}

#[derive(Serialize)]
struct CheckRow<'a> {
    suite: &'a str,
    check: &'a str,
    passed: bool,
    detail: &'a str,
}

fn verify_cmd(cli: &Cli, suite: &str, k: u32, q_slack: u32, glue_table: Option<&Path>) -> Outcome {
    let suites: Vec<Suite> = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
    let cfg = Config { k_max: cli.k_max, q_slack, seed: cli.seed, bilipschitz_k: k };
    let tables = match glue_table {
        Some(p) => vec![GlueTable::parse(&read(p)?)?],
        None => vec![GlueTable::standard(Variant::M), GlueTable::standard(Variant::N)],
    };
    if cli.format == Format::Csv {
        emit(None, "suite,check,passed,detail\n")?;
    }
    let mut all_passed = true;
    for s in suites {
        let report = verify::run_with_tables(s, &cfg, &tables)?;
        all_passed &= report.passed();
        let mut text = String::new();
        for c in &report.checks {
            match cli.format {
                Format::Csv => {
                    text.push_str(&format!("{s},{},{},{}\n", csv_field(&c.name), c.passed, csv_field(&c.detail)))
                }
                Format::JsonLines => text.push_str(&json_line(&CheckRow {
                    suite: s.name(),
                    check: &c.name,
                    passed: c.passed,
                    detail: &c.detail,
                })),
            }
        }
        emit(None, &text)?;
    }
    if all_passed { Ok(()) } else { Err(Failure::Verification) }
}

fn cell_set_operand(arg: &str) -> Result<CellSet, Failure> {
    match arg.parse::<u32>() {
        Ok(p) => Ok(iterate(&CellSet::unit(), p, DEFAULT_MAX_CELLS)?),
        Err(_) => Ok(CellSet::from_text(&read(Path::new(arg))?)?),
    }
}

#[derive(Serialize)]
struct HausdorffRow {
    lower: String,
    upper: String,
    sample_level: u32,
}

fn hutchinson(cli: &Cli, what: &HutchCmd) -> Outcome {
    match what {
        HutchCmd::Iterate { p, out } => {
            let set = iterate(&CellSet::unit(), *p, DEFAULT_MAX_CELLS)?;
            emit(out.as_deref(), &set.to_text())
        }
        HutchCmd::Hausdorff { a, b, q } => {
            let (sa, sb) = (cell_set_operand(a)?, cell_set_operand(b)?);
            let h = hausdorff_taxi(&sa, &sb, *q)?;
            let text = match cli.format {
                Format::Csv => format!("lower,upper,sample_level\n{},{},{}\n", h.lower, h.upper, h.sample_level),
                Format::JsonLines => json_line(&HausdorffRow {
                    lower: h.lower.to_string(),
                    upper: h.upper.to_string(),
                    sample_level: h.sample_level,
                }),
            };
            emit(None, &text)
        }
    }
}
