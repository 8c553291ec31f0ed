use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice-zeta")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> serde_json::Value {
    let out = bin(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn csv_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].clone()).collect()
}

#[test]
fn fcc_and_bcc_agree_at_the_turning_point() {
    let f = json(&["zeta", "--structure", "fcc", "--s", "1.5"])["value"].as_f64().unwrap();
    let b = json(&["zeta", "--structure", "bcc", "--s", "1.5"])["value"].as_f64().unwrap();
    assert!((f - b).abs() < 1e-10, "{f} {b}");
}

#[test]
fn simple_cubic_near_zero() {
    let v = json(&["zeta", "--structure", "sc", "--s", "0.000001"]);
    assert!((v["value"].as_f64().unwrap() + 0.5).abs() < 1e-5, "{v}");
    assert_eq!(v["route"], "closed_form");
}

#[test]
fn zeta_routes_agree_for_hexagonal_structures() {
    let args = |route| ["zeta", "--structure", "sh", "--delta", "1.3", "--s", "7", "--volume", "2", "--route", route];
    let c = json(&args("closed"))["value"].as_f64().unwrap();
    let e = json(&args("ewald"))["value"].as_f64().unwrap();
    let d = json(&args("direct"))["value"].as_f64().unwrap();
    assert!((c - e).abs() < 1e-10 * c.abs() && (c - d).abs() < 1e-9 * c.abs(), "{c} {e} {d}");
}

#[test]
fn lennard_jones_defaults_to_optimal_volume() {
    let v = json(&["lj", "--structure", "fcc", "--n", "12", "--m", "6"]);
    assert!((v["volume"].as_f64().unwrap() - 0.647822786).abs() < 1e-8, "{v}");
    let at = json(&["lj", "--structure", "fcc", "--n", "12", "--m", "6", "--volume", "1"]);
    assert!(at["energy"].as_f64().unwrap() > v["energy"].as_f64().unwrap());
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["zeta", "--structure", "diamond", "--s", "1"]).status.code(), Some(64));
    assert_eq!(bin(&["zeta", "--structure", "fcc", "--s", "1", "--frobnicate"]).status.code(), Some(64));
    assert_eq!(bin(&["minimize", "--objective", "riesz", "--s", "1"]).status.code(), Some(64));
    assert_eq!(bin(&["zeta", "--structure", "fcc", "--s", "3"]).status.code(), Some(2));
    assert_eq!(bin(&["zeta", "--structure", "fcc", "--s", "2", "--route", "direct"]).status.code(), Some(2));
    let starved = ["minimize", "--objective", "riesz", "--s", "2", "--volume", "1", "--starts", "2", "--max-iters", "1"];
    assert_eq!(bin(&starved).status.code(), Some(3));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn logs_are_key_value_pairs() {
    let out = bin(&["scan-riesz", "--s-min", "2.9", "--s-max", "3.1", "--s-step", "0.1", "--format", "csv"]);
    assert!(out.status.success());
    let log = String::from_utf8(out.stderr).unwrap();
    assert!(log.lines().any(|l| l.contains("event=skip") && l.contains("s=3") && l.contains("reason=pole_band")), "{log}");
    for line in log.lines() {
        assert!(line.split(' ').next().unwrap().starts_with("level="), "{line}");
    }
    let (header, rows) = csv_rows(&out.stdout);
    assert_eq!(header, ["s", "zeta_fcc", "zeta_bcc", "zeta_hcp", "fcc_minus_bcc", "hcp_minus_min", "label", "kind"]);
    assert_eq!(rows.len(), 2);
}

fn run_to_file(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap();
    full.extend(["--out", p]);
    let out = bin(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(&path).unwrap()
}

#[test]
fn identical_arguments_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let delta = ["scan-delta", "--n", "12", "--m", "5", "--v-min", "1", "--v-max", "2", "--steps", "11", "--format", "csv"];
    let a = run_to_file(dir.path(), "a.csv", &delta);
    let b = run_to_file(dir.path(), "b.csv", &delta);
    assert_eq!(a, b);
    let min = ["minimize", "--objective", "lj", "--n", "12", "--m", "6", "--volume", "0.9", "--starts", "6", "--seed", "11", "--format", "csv"];
    let c = run_to_file(dir.path(), "c.csv", &min);
    let mut single: Vec<&str> = min.to_vec();
    single.extend(["--threads", "1"]);
    let d = run_to_file(dir.path(), "d.csv", &single);
    assert_eq!(c, d);
    let (header, rows) = csv_rows(&c);
    assert_eq!(column(&header, &rows, "kind"), ["FCC"]);
}

const ORDER: [&str; 3] = ["FCC", "HCP", "SH"];

fn assert_monotone(kinds: &[String]) {
    let ranks: Vec<usize> = kinds.iter().map(|k| ORDER.iter().position(|o| o == k).unwrap_or_else(|| panic!("{k}"))).collect();
    assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{kinds:?}");
}

#[test]
fn phase_scan_example() {
    let out = bin(&["scan-phase", "--m", "6", "--n", "12", "--v-min", "0.8", "--v-max", "3", "--steps", "100", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 100);
    let kinds = column(&header, &rows, "kind");
    assert_monotone(&kinds);
    // the FCC band of (12, 6) ends near V = 0.33, below this grid
    assert_eq!(kinds.first().unwrap(), "HCP");
    assert_eq!(kinds.last().unwrap(), "SH");
    assert!(column(&header, &rows, "flagged").iter().all(|f| f == "false"));
    assert_eq!(column(&header, &rows, "cross_checked").iter().filter(|c| *c == "true").count(), 20);
}

#[test]
fn phase_scan_without_hcp() {
    let out = bin(&[
        "scan-phase", "--m", "6", "--n", "12", "--v-min", "0.2", "--v-max", "3", "--steps", "57", "--no-hcp",
        "--cross-check-every", "0", "--format", "csv",
    ]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&out.stdout);
    let kinds = column(&header, &rows, "kind");
    assert_monotone(&kinds);
    assert!(!kinds.iter().any(|k| k == "HCP"));
    assert!(kinds.contains(&"FCC".to_string()) && kinds.contains(&"SH".to_string()));
}
