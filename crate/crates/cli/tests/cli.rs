use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn carpet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carpet")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn distance_around_the_hole() {
    let o = carpet(&["distance", "M", "2", "(1,0)(0,1)@(0,0)", "(1,2)(0,1)@(0,0)"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "distance,approx\n2/3,0.666667\n");
}

#[test]
fn distance_identical_and_worked_pair() {
    let o = carpet(&["distance", "M", "1", "(0,2)@(1,0)", "(0,2)@(1,0)"]);
    assert!(stdout(&o).starts_with("distance,approx\n0,"));
    let o = carpet(&["distance", "N", "2", "(0,0)(2,2)@(0,0)", "(2,2)(0,0)@(1,0)"]);
    assert!(stdout(&o).contains("\n1,1.000000"));
}

#[test]
fn distance_json_lines() {
    let o = carpet(&["--format", "json-lines", "distance", "M", "1", "(0,0)@(0,0)", "(1,0)@(0,0)"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["distance"], "1/3");
}

#[test]
fn exit_codes() {
    let parse = carpet(&["distance", "M", "2", "(1,1)@(0,0)", "(0,0)@(0,0)"]);
    assert_eq!(parse.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("column"));
    let deep = carpet(&["distance", "M", "9", "(0,0)@(0,0)", "(0,0)@(0,0)"]);
    assert_eq!(deep.status.code(), Some(3));
    let usage = carpet(&["distance", "M"]);
    assert_eq!(usage.status.code(), Some(2));
    let big = carpet(&["render", "carpet", "9"]);
    assert_eq!(big.status.code(), Some(3));
}

#[test]
fn solve_examples() {
    let dir = tempfile::tempdir().unwrap();
    let two = write(dir.path(), "two.txt", "variant M\nz1 -> (1,2) z2\nz2 -> (0,2) z1\n");
    let o = carpet(&["solve", &two]);
    assert_eq!(stdout(&o), "state,x,y,member,verified\nz1,3/8,1,true,true\nz2,1/8,1,true,true\n");

    let fixed = write(dir.path(), "fixed.txt", "variant N\n# origin\na -> (0,0) a\n");
    assert_eq!(stdout(&carpet(&["solve", &fixed])), "state,x,y,verified\na,0,0,true\n");

    let interval = write(dir.path(), "i.txt", "variant interval delta 1/3\nx -> 1/2 x\n");
    assert_eq!(stdout(&carpet(&["solve", &interval])), "state,value,verified\nx,3/4,true\n");
}

#[test]
fn solve_rejects_centre_under_m() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.txt", "variant M\na -> (0,0) b\nb -> (1,1) a\n");
    let o = carpet(&["solve", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let missing = carpet(&["solve", "/nonexistent/file"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn render_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.svg");
    let o = carpet(&["render", "carpet", "3", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap().matches("<rect ").count(), 512);
    assert_eq!(stdout(&carpet(&["render", "carpet", "0"])).matches("<rect ").count(), 1);
    assert_eq!(stdout(&carpet(&["render", "lattice", "1", "M"])).matches("<line ").count(), 24);
}

#[test]
fn render_solution_marks_each_state() {
    let dir = tempfile::tempdir().unwrap();
    let two = write(dir.path(), "two.txt", "variant M\nz1 -> (1,2) z2\nz2 -> (0,2) z1\n");
    let svg = stdout(&carpet(&["render", "solution", &two]));
    assert_eq!(svg.matches("<circle ").count(), 2);
    assert!(svg.contains("data-state=\"z1\""));
}

#[test]
fn verify_nqm_passes() {
    let o = carpet(&["verify", "nqm"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.lines().skip(1).all(|l| l.contains(",true,")));
    assert!(s.contains("0 mismatches"));
}

#[test]
fn verify_bilipschitz_reports_ratio() {
    let o = carpet(&["verify", "bilipschitz", "--k", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("max ratio"));
}

#[test]
fn verify_all_fails_on_corrupted_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = write(
        dir.path(),
        "broken.txt",
        "variant M\n(0,0) top (0,1) bottom\n(0,1) top (0,2) bottom\n(0,2) right (1,2) left\n",
    );
    let o = carpet(&["verify", "all", "--glue-table", &table]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("gluing,M-closure-level-1,false"));
}

#[test]
fn verify_unknown_suite() {
    assert_eq!(carpet(&["verify", "everything"]).status.code(), Some(2));
}

#[test]
fn hutchinson_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s2.txt");
    let o = carpet(&["hutchinson", "iterate", "2", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("level 2\n"));
    assert_eq!(text.lines().count(), 65);

    let o = carpet(&["hutchinson", "hausdorff", out.to_str().unwrap(), "3", "--q", "5"]);
    assert_eq!(stdout(&o), "lower,upper,sample_level\n4/243,2/81,5\n");
    assert_eq!(carpet(&["hutchinson", "hausdorff", "0", "1", "--q", "8"]).status.code(), Some(3));
}
