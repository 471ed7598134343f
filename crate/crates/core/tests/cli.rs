use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgn::experiment::{ExperimentReport, SweepReport};

fn cgn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgn")).args(args).output().unwrap()
}

fn iris() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/iris.csv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/iris.csv");
    let o = cgn(&[
        "run",
        "--dataset",
        s(&iris()),
        "--class",
        "species",
        "--repetitions",
        "2",
        "--folds",
        "5",
        "--set",
        "seed=4",
        "--output",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("BA"), "{stdout}");
    let report = ExperimentReport::from_csv(&std::fs::read_to_string(&out).unwrap(), 0.05).unwrap();
    assert_eq!(report.folds.len(), 2 * 2 * 5);
    assert!(dir.path().join("nested/iris.summary.txt").exists());
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# iris, naive Bayes\ndataset = {}\nclass = species\nrepetitions = 1\nfolds = 3\nlearners = BA\n",
            iris().display()
        ),
    )
    .unwrap();
    let o = cgn(&["run", "--config", s(&cfg), "--set", "folds=4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = cgn(&["run", "--config", s(&cfg), "--set", "colour=red"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn missing_dataset_fails() {
    let o = cgn(&["run", "--dataset", "/nonexistent/x.csv"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn gen_spectra_validate_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("spectra.csv");
    let o = cgn(&["gen-spectra", "--n-vars", "10", "--n-per-class", "8", "--output", s(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("class,x1,"));
    assert_eq!(text.lines().count(), 17);

    let o = cgn(&["validate", "--dataset", s(&data), "--structure", "kband:3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    // the last box variable regresses on 9 parents plus an intercept: 8 rows per class are too few
    let o = cgn(&["validate", "--dataset", s(&data), "--structure", "kbox:10"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));

    let sweep = dir.path().join("sweep.csv");
    let o = cgn(&[
        "sweep",
        "--n-vars",
        "8",
        "--n-per-class",
        "20",
        "--family",
        "kband",
        "--k",
        "1,2",
        "--repetitions",
        "1",
        "--folds",
        "4",
        "--output",
        s(&sweep),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = SweepReport::from_csv(&std::fs::read_to_string(&sweep).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 2 * 2);
}

#[test]
fn validate_reports_structure_errors() {
    let dir = tempfile::tempdir().unwrap();
    let structure = dir.path().join("bad.txt");
    // a continuous parent of the discrete class
    std::fs::write(&structure, "node 4 discrete parents=0\n").unwrap();
    let o = cgn(&[
        "validate",
        "--dataset",
        s(&iris()),
        "--class",
        "species",
        "--structure",
        s(&structure),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("structure:"));
}
