use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mutfreq(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mutfreq"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = mutfreq(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|row| row.unwrap()[idx].parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn zero_rate_leaves_every_site_unmutated() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--n",
            "200",
            "--mu",
            "0",
            "--sites",
            "5",
            "--replicates",
            "4",
        ],
    );
    let b = column(&dir.path().join("b.csv"), "B");
    assert_eq!(b.len(), 20);
    assert!(b.iter().all(|&x| x == 0.0));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["replicates"], 4);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn seeded_output_is_identical_across_thread_counts() {
    let runs: [&[&str]; 3] = [
        &[
            "simulate",
            "--n",
            "300",
            "--mu",
            "0.01",
            "--sites",
            "20",
            "--replicates",
            "30",
            "--death",
            "0.3",
            "--tree",
        ],
        &["ld", "sample", "--c", "2", "--draws", "20000"],
        &["cox", "--eta", "1", "--draws", "200", "--prune-eps", "0.01"],
    ];
    for args in runs {
        let mut snaps = Vec::new();
        for threads in ["1", "3", "3"] {
            let dir = TempDir::new().unwrap();
            let mut full = vec!["--seed", "99", "--threads", threads];
            full.extend_from_slice(args);
            ok(dir.path(), &full);
            snaps.push(snapshot(dir.path()));
        }
        assert!(!snaps[0].is_empty());
        assert_eq!(snaps[0], snaps[1], "{args:?}");
        assert_eq!(snaps[1], snaps[2], "{args:?}");
    }
}

#[test]
fn descendant_counts_bound_mutant_counts() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "--n",
            "500",
            "--mu",
            "0.02",
            "--sites",
            "10",
            "--replicates",
            "50",
            "--death",
            "0.4",
        ],
    );
    let path = dir.path().join("b.csv");
    for (b, bh) in column(&path, "B").into_iter().zip(column(&path, "B_hat")) {
        assert!(b <= bh && bh <= 500.0);
    }
}

#[test]
fn ld_tables() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["ld", "pmf", "--c", "2", "--max", "300"]);
    let pmf = column(&dir.path().join("ld_pmf.csv"), "pmf");
    assert_eq!(pmf.len(), 301);
    assert!((pmf[0] - (-2f64).exp()).abs() < 1e-15);
    let total: f64 = pmf.iter().sum();
    assert!(pmf.iter().all(|&p| p >= 0.0) && total <= 1.0 + 1e-12 && total > 0.98);

    ok(dir.path(), &["ld", "tail", "--c", "2", "--m", "200,10000"]);
    let asym = column(&dir.path().join("ld_tail.csv"), "asymptote");
    assert!((asym[0] - 0.01).abs() < 1e-15);
    let tail = column(&dir.path().join("ld_tail.csv"), "tail");
    // the correction to c/m is of order log(m)/m
    assert!((tail[1] / asym[1] - 1.0).abs() < 0.005);

    ok(dir.path(), &["ld", "pgf", "--c", "1", "--z", "0,0.5,1"]);
    let pgf = column(&dir.path().join("ld_pgf.csv"), "pgf");
    assert!((pgf[0] - (-1f64).exp()).abs() < 1e-15 && pgf[2] == 1.0);
}

#[test]
fn generalised_sampler_reduces_to_ld() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "genld",
            "sample",
            "--lambda",
            "1",
            "--a",
            "1",
            "--b",
            "0",
            "--c",
            "2",
            "--draws",
            "1e5",
            "--compare-ld",
        ],
    );
    let ks = column(&dir.path().join("genld_sample.csv"), "ks");
    assert!(ks[0] <= 0.01, "KS {}", ks[0]);
}

#[test]
fn isa_audit_at_genome_scale() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["isa", "--n", "1e9", "--mu", "1e-9", "--sites", "3e9"]);
    let v = json(&dir.path().join("isa.json"));
    let limit = 1.0 - 3.0 * (-2f64).exp();
    assert!((v["p"].as_f64().unwrap() - limit).abs() < 1e-3);
    let e = v["expected_violations"].as_f64().unwrap();
    assert!((e / (3e9 * limit) - 1.0).abs() < 1e-3);
}

#[test]
fn estimate_from_lung_records() {
    let dir = TempDir::new().unwrap();
    let input = data_file("lung.csv");
    let input = input.to_str().unwrap();
    ok(
        dir.path(),
        &["estimate", "--input", input, "--sites", "3e8", "--bootstrap", "200"],
    );
    let v = json(&dir.path().join("estimate.json"));
    assert_eq!(v["count"], 112);
    assert!((v["mu_hat"].as_f64().unwrap() * 1e9).round() == 62.0);
    // every record lies in the window, so resampling cannot move the count
    let ci = v["bootstrap_ci"].as_array().unwrap();
    assert_eq!(ci[0], v["mu_hat"]);
    assert_eq!(ci[1], v["mu_hat"]);

    let fixture = data_file("lung_adenocarcinoma_counts.json");
    ok(
        dir.path(),
        &[
            "estimate",
            "--input",
            input,
            "--sites",
            "3e8",
            "--fixture",
            fixture.to_str().unwrap(),
            "--bootstrap",
            "0",
        ],
    );
    let v = json(&dir.path().join("estimate.json"));
    let per = &v["per_nucleotide"];
    for (base, printed) in [("A", 0.7), ("C", 12.8), ("G", 15.0), ("T", 1.5)] {
        let x = per[base].as_f64().unwrap() * 1e8;
        assert!(((x * 10.0).round() / 10.0 - printed).abs() < 1e-9, "{base}: {x}");
    }
    assert!(v["bootstrap_ci"].is_null());
}

#[test]
fn empty_cox_measure_writes_header_only() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["cox", "--eta", "0", "--draws", "10"]);
    assert!(rows(&dir.path().join("cox_atoms.csv")).is_empty());
    let mean = column(&dir.path().join("cox_tail.csv"), "mean");
    assert!(mean.iter().all(|&m| m == 0.0));
}

#[test]
fn json_format_writes_records() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["--format", "json", "ld", "pmf", "--c", "1", "--max", "3"]);
    let v = json(&dir.path().join("ld_pmf.json"));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["m"], 0);
}

#[test]
fn compare_against_law_and_sample() {
    let dir = TempDir::new().unwrap();
    let sample = dir.path().join("s.csv");
    fs::write(&sample, "b\n0\n1\n1\n3\n").unwrap();
    let other = dir.path().join("t.csv");
    fs::write(&other, "b\n0\n1\n1\n3\n").unwrap();
    ok(
        dir.path(),
        &[
            "compare",
            "--sample",
            sample.to_str().unwrap(),
            "--other",
            other.to_str().unwrap(),
        ],
    );
    assert_eq!(json(&dir.path().join("compare.json"))["ks"], 0.0);
    ok(
        dir.path(),
        &["compare", "--sample", sample.to_str().unwrap(), "--c", "1"],
    );
    let ks = json(&dir.path().join("compare.json"))["ks"].as_f64().unwrap();
    assert!(ks > 0.0 && ks <= 1.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| mutfreq(dir.path(), args).status.code().unwrap();
    assert_eq!(code(&["ld", "pmf", "--c", "-1"]), 2);
    assert_eq!(code(&["simulate", "--n", "0", "--mu", "0.1"]), 2);
    assert_eq!(
        code(&["estimate", "--input", "/nonexistent/vaf.csv", "--sites", "10"]),
        3
    );
    assert_eq!(
        code(&[
            "genld",
            "pgf",
            "--lambda",
            "1",
            "--a",
            "1",
            "--b",
            "0.999999999",
            "--c",
            "1",
            "--z",
            "0"
        ]),
        4
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "vaf\n0.2\nx\n").unwrap();
    let o = mutfreq(
        dir.path(),
        &["estimate", "--input", bad.to_str().unwrap(), "--sites", "10"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}
