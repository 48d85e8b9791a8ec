#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_defirisk"))
}

/// Runs `defirisk <cmd> <args>` and returns the raw output.
pub fn run(cmd: &str, args: &[&str]) -> Output {
    bin().arg(cmd).args(args).output().expect("binary runs")
}

pub fn run_ok(cmd: &str, args: &[&str]) -> Output {
    let out = run(cmd, args);
    assert!(
        out.status.success(),
        "{cmd} {args:?} failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// The fixture inputs as flags.
pub fn inputs() -> Vec<String> {
    vec![
        "--incidents".into(),
        path_str(&fixture("incidents.csv")).into(),
        "--tvl".into(),
        path_str(&fixture("tvl.csv")).into(),
        "--portfolio".into(),
        path_str(&fixture("portfolio.json")).into(),
    ]
}

/// Runs the whole pipeline into `out`: fits, gof, summary, pricing and a
/// simulation spanning several parallel blocks.
pub fn pipeline(out: &Path, workers: &str) {
    let mut base = inputs();
    base.extend(["--output".into(), path_str(out).into(), "--workers".into(), workers.into()]);
    let base: Vec<&str> = base.iter().map(String::as_str).collect();
    for cmd in ["fit-frequency", "fit-severity", "gof", "summarize"] {
        run_ok(cmd, &base);
    }
    run_ok("price", &[&base[..], &["--samples", "20000"]].concat());
    run_ok("simulate", &[&base[..], &["--samples", "200000"]].concat());
}

/// Every file in `dir` with its bytes.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).expect("csv opens");
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| header.iter().zip(rec.unwrap().iter()).map(|(k, v)| (k.to_string(), v.to_string())).collect())
        .collect()
}

pub fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key} = `{}` is not numeric", row[key]))
}

pub const PROTOCOLS: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];
/// Reference monthly attack probabilities.
pub const ATTACK_PROB: [f64; 8] = [0.024025, 0.028789, 0.016133, 0.036861, 0.021658, 0.058898, 0.046547, 0.052114];
/// Expected loss given an attack, % of TVL.
pub const LOSS_PCT: [f64; 8] = [4.3901, 5.9181, 8.8469, 8.5272, 9.9399, 13.4714, 6.0779, 7.1940];
/// Expectation-principle premiums, % of TVL, at θ = 0.5.
pub const EXPECTATION_PCT: [f64; 8] = [0.1585, 0.2552, 0.2136, 0.4721, 0.3237, 1.1920, 0.4240, 0.5626];

/// Writes an overrides file carrying the published attack probabilities and
/// loss percentages.
pub fn write_reference_overrides(path: &Path) {
    let doc: BTreeMap<&str, serde_json::Value> = PROTOCOLS
        .iter()
        .enumerate()
        .map(|(i, id)| (*id, serde_json::json!({ "attack_prob": ATTACK_PROB[i], "loss_fraction": LOSS_PCT[i] / 100.0 })))
        .collect();
    fs::write(path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
}
