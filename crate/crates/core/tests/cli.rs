use std::process::{Command, Output};

use euler_forms::recurrence::{FamilyName, SequenceFamily};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_euler-forms"));
    cmd.env_remove(euler_forms::cli::CACHE_ENV);
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> &str {
    std::str::from_utf8(&o.stdout).unwrap()
}

#[test]
fn gen_uvw_rows() {
    let o = run(&["gen", "--family", "uvw", "--max-n", "3", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).lines().last().unwrap(),
        "3,82861,-225240,-179426"
    );
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    for args in [
        &["gen", "--family", "uvw", "--max-n", "-1"][..],
        &["gen", "--family", "nope", "--max-n", "3"],
        &["constants", "--which", "gamma", "--digits", "0"],
        &["verify", "--suite", "everything"],
        &["fit", "--form", "l", "--range", "100"],
        &["verify", "--suite", "asymptotics", "--max-n", "10"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn verification_failure_exits_1() {
    let o = run(&["verify", "--suite", "asymptotics", "--max-n", "60"]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["checks"][0]["name"], "f constant");
}

#[test]
fn integrality_report() {
    let o = run(&["verify", "--suite", "integrality", "--max-n", "300"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("8 families, 2408 values checked"));
}

#[test]
fn warm_cache_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let with_cache = |args: &[&str]| {
        bin()
            .env(euler_forms::cli::CACHE_ENV, dir.path())
            .args(args)
            .output()
            .unwrap()
    };
    let args = [
        "gen", "--family", "all", "--max-n", "40", "--format", "json",
    ];
    let cold = with_cache(&args);
    assert!(dir.path().join("u.json").exists());
    let warm = with_cache(&args);
    assert_eq!(cold.stdout, warm.stdout);
    assert_eq!(cold.stdout, run(&args).stdout);

    let verify = ["verify", "--suite", "determinant", "--max-n", "30"];
    assert_eq!(with_cache(&verify).stdout, with_cache(&verify).stdout);
}

#[test]
fn tampered_cache_is_regenerated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    let good = FamilyName::Q.generate(30).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&good.to_json()).unwrap();
    for n in 3..=30 {
        doc["values"][n] = serde_json::Value::String("7".into());
    }
    std::fs::write(&path, doc.to_string()).unwrap();

    let o = bin()
        .args(["gen", "--family", "q", "--max-n", "30", "--cache-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), good.to_csv());
    let repaired = SequenceFamily::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(repaired.values(), good.values());
}

#[test]
fn constants_json_has_provenance() {
    let o = run(&[
        "constants",
        "--which",
        "gamma",
        "--digits",
        "30",
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["value"], "0.577215664901532860606512090082");
    assert_eq!(v["provenance"], "brent-mcmillan");
    assert_eq!(v["cross_check"]["route"], "euler-maclaurin");
    assert_eq!(v["cross_check"]["agrees"], true);
    let o = run(&["constants", "--which", "egd", "--digits", "10"]);
    assert_eq!(stdout(&o), "2.165382215\n");
}

#[test]
fn fit_reports_target() {
    let o = run(&[
        "fit",
        "--form",
        "f",
        "--range",
        "20..200",
        "--samples",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let c = v["c_estimate"].as_f64().unwrap();
    assert!((c - 1.448678).abs() < 0.02, "{c}");
    assert_eq!(v["converged"], true);
}
