//! End-to-end pipeline checks driven through the binary, including the
//! determinism acceptance criterion: the same scripted pipeline run twice
//! with the same seeds must produce byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_forgefuzz")
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn data(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
        .display()
        .to_string()
}

/// The scripted fixture pipeline: ingest -> features -> evolve -> baseline
/// -> replay -> analyze, all seeded, all outputs under `dir`.
fn scripted_pipeline(dir: &Path) -> Vec<PathBuf> {
    let p = |name: &str| dir.join(name).display().to_string();
    run_ok(&[
        "ingest",
        &data("sample_events.jsonl"),
        "--out",
        &p("edges.csv"),
    ]);
    run_ok(&["summary", &p("edges.csv"), "--out", &p("summary.csv")]);
    run_ok(&["features", &p("edges.csv"), "--out", &p("features.csv")]);
    run_ok(&[
        "evolve",
        &p("edges.csv"),
        "--out",
        &p("evolved.csv"),
        "--log",
        &p("evolution.csv"),
        "--generations",
        "12",
        "--lambda",
        "5",
        "--seed",
        "1337",
    ]);
    run_ok(&[
        "baseline",
        &p("edges.csv"),
        "--mode",
        "random",
        "--target-nonfollow",
        "60",
        "--target-follow",
        "12",
        "--seed",
        "99",
        "--out",
        &p("baseline.csv"),
    ]);
    run_ok(&[
        "replay",
        &p("evolved.csv"),
        "--order",
        "listed",
        "--seed",
        "7",
        "--follow-limit",
        "300",
        "--corpus",
        &data("commit_corpus.txt"),
        "--report",
        &p("report.json"),
        "--request-log",
        &p("requests.csv"),
    ]);
    run_ok(&[
        "analyze",
        "--features",
        &p("features.csv"),
        "--request-log",
        &p("requests.csv"),
        "--out-correlations",
        &p("correlations.csv"),
        "--out-plot-data",
        &p("plotdata.csv"),
    ]);

    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    fs::create_dir_all(&dir_a).unwrap();
    fs::create_dir_all(&dir_b).unwrap();

    let files_a = scripted_pipeline(&dir_a);
    let files_b = scripted_pipeline(&dir_b);

    assert_eq!(files_a.len(), files_b.len());
    // every artifact, manifests included, must be byte-identical
    let mut compared = 0;
    for (a, b) in files_a.iter().zip(files_b.iter()) {
        assert_eq!(a.file_name(), b.file_name());
        let (ba, bb) = (fs::read(a).unwrap(), fs::read(b).unwrap());
        // manifests embed the run directory in paths; normalise before diffing
        let (ba, bb) = if a.extension().is_some_and(|e| e == "json") {
            (
                String::from_utf8(ba)
                    .unwrap()
                    .replace(&dir_a.display().to_string(), "DIR"),
                String::from_utf8(bb)
                    .unwrap()
                    .replace(&dir_b.display().to_string(), "DIR"),
            )
        } else {
            (
                String::from_utf8(ba).unwrap(),
                String::from_utf8(bb).unwrap(),
            )
        };
        assert_eq!(ba, bb, "artifact {:?} differs between runs", a.file_name());
        compared += 1;
    }
    assert!(
        compared >= 14,
        "expected a full artifact set, saw {compared}"
    );
    println!(
        "criterion 10 end-to-end determinism: PASS \
         ({compared} artifacts byte-identical across two seeded runs)"
    );
}

#[test]
fn evolve_zero_generations_is_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let edges = tmp.path().join("edges.csv");
    run_ok(&[
        "ingest",
        &data("sample_events.jsonl"),
        "--out",
        &edges.display().to_string(),
    ]);
    let out = tmp.path().join("out.csv");
    run_ok(&[
        "evolve",
        &edges.display().to_string(),
        "--out",
        &out.display().to_string(),
        "--log",
        &tmp.path().join("log.csv").display().to_string(),
        "--generations",
        "0",
        "--seed",
        "5",
    ]);
    assert_eq!(fs::read(&edges).unwrap(), fs::read(&out).unwrap());
}

#[test]
fn summary_prints_event_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let edges = tmp.path().join("edges.csv");
    run_ok(&[
        "ingest",
        &data("sample_events.jsonl"),
        "--out",
        &edges.display().to_string(),
    ]);
    let out = run(&["summary", &edges.display().to_string()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("push"), "{text}");
    let row = text.lines().nth(1).unwrap();
    for expected in ["6", "4", "3", "2"] {
        assert!(row.split_whitespace().any(|f| f == expected), "{row}");
    }
}

#[test]
fn exit_codes_are_distinct() {
    // 2: usage error (unknown flag), from the argument parser
    let usage = run(&["summary", "--definitely-not-a-flag"]);
    assert_eq!(usage.status.code(), Some(2));

    // 3: missing input file
    let missing = run(&["summary", "/nonexistent/nowhere.csv"]);
    assert_eq!(missing.status.code(), Some(3));

    // 4: invalid data (unknown event type)
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(
        &bad,
        "source_kind,source_name,target_kind,target_name,event_type\n\
         user,a,repo,o/r,StarEvent\n",
    )
    .unwrap();
    let invalid = run(&["summary", &bad.display().to_string()]);
    assert_eq!(invalid.status.code(), Some(4));
    let msg = String::from_utf8(invalid.stderr).unwrap();
    assert!(msg.contains("StarEvent"), "{msg}");
}

#[test]
fn baseline_round_trips_through_with_follows() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).display().to_string();
    run_ok(&[
        "ingest",
        &data("sample_events.jsonl"),
        "--out",
        &p("edges.csv"),
    ]);
    run_ok(&[
        "baseline",
        &p("edges.csv"),
        "--mode",
        "simple",
        "--target-nonfollow",
        "30",
        "--target-follow",
        "8",
        "--seed",
        "3",
        "--out",
        &p("simple.csv"),
    ]);
    // without the flag the stored follow rows must be rejected
    let denied = run(&["features", &p("simple.csv"), "--out", &p("f.csv")]);
    assert_eq!(denied.status.code(), Some(4));
    run_ok(&[
        "features",
        &p("simple.csv"),
        "--with-follows",
        "--out",
        &p("f.csv"),
    ]);
    run_ok(&["summary", &p("simple.csv"), "--with-follows"]);
}
