//! Command-line behaviour of `avic-bench`.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_avic-bench"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

#[test]
fn check_passes_on_satisfied_bounds() {
    let out = bin()
        .args(["run", "--check"])
        .arg(scenario("velocity_profile"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));
}

#[test]
fn check_fails_on_violated_bound() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("velocity_profile"))
        .unwrap()
        .replace("max = 10.0", "max = 0.1");
    let path = dir.path().join("strict.toml");
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["run", "--check"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check failed"));
}

#[test]
fn missing_scenario_is_an_error() {
    let out = bin().args(["run", "/nonexistent.toml"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_compare_and_export_chain() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, controller) in [(&a, "avic"), (&b, "fixed_gain")] {
        let status = bin()
            .args(["run", "--controller", controller, "--out"])
            .arg(out)
            .arg(scenario("velocity_profile"))
            .output()
            .unwrap();
        assert!(status.status.success());
    }
    let out = bin()
        .args(["compare", "--metric", "max_acceleration"])
        .arg(a.join("summary.json"))
        .arg(b.join("summary.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean"));

    let table = dir.path().join("table.csv");
    let status = bin()
        .arg("export")
        .arg(a.join("summary.json"))
        .arg("--out")
        .arg(&table)
        .output()
        .unwrap();
    assert!(status.status.success());
    let text = std::fs::read_to_string(table).unwrap();
    assert!(text.starts_with("trial,ticks,duration"));
    assert_eq!(text.lines().count(), 2);
}
