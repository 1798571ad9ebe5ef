//! End-to-end tests of the installed binary: run/sweep/check/cache against
//! real subprocesses, exit codes and JSON included.

use std::path::Path;
use std::process::{Command, Output};

fn bin(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dirac-split"));
    c.current_dir(dir);
    // Tests pin the cache explicitly; the ambient environment must not leak in.
    c.env_remove("DIRAC_SPLIT_CACHE");
    c
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}):\n{}", String::from_utf8_lossy(&out.stdout))
    })
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| {
        panic!("stderr is not JSON ({e}):\n{}", String::from_utf8_lossy(&out.stderr))
    })
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn free_flow_run_matches_the_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args([
            "run", "--lo", "-16", "--hi", "16", "--points", "64", "--potential", "zero",
            "--initial", "gaussian-pair", "--t-final", "1", "--epsilon", "0.5", "--tau", "0.125",
            "--ref-steps", "2000", "--scheme", "s1", "--out", "out",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let summary = stdout_json(&out);
    // Without a potential both the coarse run and the reference apply the
    // same exact flow, so only rounding is left.
    assert!(summary["error"].as_f64().unwrap() <= 1e-10, "{summary}");
    assert!(summary["mass_drift"].as_f64().unwrap() <= 1e-12, "{summary}");
    let norm = summary["l2_norm"].as_f64().unwrap();
    let expected = (2.0 * std::f64::consts::PI.sqrt()).sqrt();
    assert!((norm - expected).abs() < 1e-9, "norm {norm} vs {expected}");
    assert_eq!(summary["steps"].as_u64(), Some(8));
}

#[test]
fn malformed_ladder_reports_every_problem_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args([
            "sweep", "--preset", "example1", "--scheme", "s1", "--tau0", "pi/4", "--ratio", "0.5",
            "--levels", "0",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stdout: {}", text(&out.stdout));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "config");
    let messages = err["error"]["messages"].as_array().unwrap();
    let joined = messages.iter().map(|m| m.as_str().unwrap()).collect::<Vec<_>>().join("\n");
    assert!(joined.contains("ratio must exceed 1"), "{joined}");
    assert!(joined.contains("at least one level"), "{joined}");
}

#[test]
fn run_rejects_ambiguous_cell_selection() {
    let dir = tempfile::tempdir().unwrap();
    // example1 brings 8 epsilon rows and a 7-level ladder; run needs one cell.
    let out = bin(dir.path()).args(["run", "--preset", "example1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    let joined = err["error"]["messages"].to_string();
    assert!(joined.contains("exactly one epsilon"), "{joined}");
    assert!(joined.contains("exactly one step size"), "{joined}");
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args([
            "sweep", "--preset", "example2", "--scheme", "s1", "--epsilon", "0.5", "--epsilon",
            "0.25", "--tau0", "0.5", "--ratio", "2", "--levels", "3", "--out", "out", "--cache",
            "refs", "--dump-config",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let dumped = text(&out.stdout);
    assert!(dumped.contains("preset = \"example2\""), "{dumped}");

    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, &dumped).unwrap();
    let again = bin(dir.path())
        .args(["sweep", "--config", "sweep.toml", "--dump-config"])
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(0), "stderr: {}", text(&again.stderr));
    assert_eq!(dumped, text(&again.stdout), "config echo must be a fixed point");
}

#[test]
fn check_passes_clean_without_any_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path()).arg("check").output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stdout: {}", text(&out.stdout));
    let report = text(&out.stdout);
    let passes = report.lines().filter(|l| l.starts_with("pass")).count();
    assert_eq!(passes, 8, "{report}");
    assert!(!report.contains("FAIL"), "{report}");
    // The suite is reference-free: nothing may appear on disk.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn injected_sigma2_fault_flips_exactly_the_algebra_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path()).args(["check", "--fault", "sigma2-sign"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "stdout: {}", text(&out.stdout));
    let report = text(&out.stdout);
    let fails: Vec<&str> = report.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(fails.len(), 1, "{report}");
    assert!(fails[0].contains("matrix-algebra"), "{report}");
    assert_eq!(report.lines().filter(|l| l.starts_with("pass")).count(), 7, "{report}");
}

#[test]
fn cache_round_trip_with_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs");
    let run_args = [
        "run", "--lo", "-8", "--hi", "8", "--points", "32", "--potential", "const:1.0",
        "--initial", "gaussian-pair", "--t-final", "1", "--epsilon", "1", "--tau", "0.25",
        "--ref-steps", "500", "--scheme", "s2", "--out", "out",
    ];

    let first = bin(dir.path()).args(run_args).env("DIRAC_SPLIT_CACHE", &refs).output().unwrap();
    assert_eq!(first.status.code(), Some(0), "stderr: {}", text(&first.stderr));
    assert_eq!(stdout_json(&first)["reference"]["loaded"], false);

    let second = bin(dir.path()).args(run_args).env("DIRAC_SPLIT_CACHE", &refs).output().unwrap();
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(stdout_json(&second)["reference"]["loaded"], true);

    let list = bin(dir.path())
        .args(["cache", "list"])
        .env("DIRAC_SPLIT_CACHE", &refs)
        .output()
        .unwrap();
    assert_eq!(list.status.code(), Some(0));
    assert!(text(&list.stdout).contains("1 cached reference(s)"), "{}", text(&list.stdout));
    assert!(text(&list.stdout).contains("const:1.0"), "{}", text(&list.stdout));

    let clear = bin(dir.path())
        .args(["cache", "clear"])
        .env("DIRAC_SPLIT_CACHE", &refs)
        .output()
        .unwrap();
    assert_eq!(clear.status.code(), Some(0));
    assert!(text(&clear.stdout).contains("removed 1"), "{}", text(&clear.stdout));

    let empty = bin(dir.path())
        .args(["cache", "list"])
        .env("DIRAC_SPLIT_CACHE", &refs)
        .output()
        .unwrap();
    assert!(text(&empty.stdout).contains("0 cached reference(s)"), "{}", text(&empty.stdout));
}

#[test]
fn single_cell_sweep_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args([
            "sweep", "--lo", "-16", "--hi", "16", "--points", "64", "--potential",
            "rational-ramp", "--initial", "gaussian-pair", "--t-final", "1", "--epsilon", "0.5",
            "--tau", "0.125", "--ref-steps", "2000", "--scheme", "s2", "--out", "out", "--cache",
            "refs", "--workers", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["epsilons"].as_u64(), Some(1));
    assert_eq!(summary["taus"].as_u64(), Some(1));

    let csv_path = dir.path().join(summary["csv"].as_str().unwrap());
    let json_path = dir.path().join(summary["json"].as_str().unwrap());
    let csv = std::fs::read_to_string(csv_path).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(csv.lines().next().unwrap().starts_with("epsilon,tau,error"), "{csv}");
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(table["cells"].as_array().unwrap().len(), 1);
    assert_eq!(table["sweep"]["preset"], "inline");
}

#[test]
fn preset_run_reports_the_coarse_strang_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args([
            "run", "--preset", "example1", "--scheme", "s2", "--epsilon", "1", "--tau", "pi/4",
            "--out", "out", "--cache", "refs",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", text(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["scheme"], "s2");
    assert_eq!(summary["steps"].as_u64(), Some(8));
    assert!(summary["mass_drift"].as_f64().unwrap() < 1e-10, "{summary}");
    assert!(summary["error"].as_f64().unwrap() > 0.0, "{summary}");
    // Coarsest-cell absolute error on this problem sits near 8.1e-2 in the
    // unnormalized convention the published tables use.
    let error_l2 = summary["error_l2"].as_f64().unwrap();
    assert!(
        (8.08e-2 / 2.0..=8.08e-2 * 2.0).contains(&error_l2),
        "absolute error {error_l2} strayed from the pinned coarse value"
    );
}

#[test]
fn missing_reference_without_recompute_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path())
        .args([
            "run", "--preset", "example1", "--scheme", "s1", "--epsilon", "0.5", "--tau", "pi/4",
            "--cache", "empty-refs", "--no-compute-references", "--out", "out",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stdout: {}", text(&out.stdout));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "runtime");
    assert!(err["error"]["messages"].to_string().contains("missing cached reference"), "{err}");
}
