use std::path::Path;
use std::process::{Command, Output};

fn vcselect(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vcselect"));
    cmd.args(args);
    if let Some(w) = workers {
        cmd.env("VCSELECT_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_fit_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let out = vcselect(&["generate", "--n", "80", "--p", "12", "--seed", "5", "--out", path(&data)], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for f in [&a, &b] {
        let out = vcselect(&["fit", path(&data), "--K", "8", "--grid-size", "8", "--out", path(f)], None);
        assert!(matches!(out.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ja = std::fs::read(&a).unwrap();
    assert_eq!(ja, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(v["p"], 12);
    assert_eq!(v["covariates"].as_array().unwrap().len(), 12);
    assert_eq!(v["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for (i, w) in ["1", "1", "3"].iter().enumerate() {
        let out_dir = dir.path().join(format!("r{i}"));
        let out = vcselect(
            &[
                "simulate", "--reps", "2", "--seed", "7", "--n", "60", "--p", "10", "--grid-size", "6",
                "--methods", "glasso-BIC,aglasso-BIC-EBIC,oracle", "--out", path(&out_dir),
            ],
            Some(w),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push((
            std::fs::read(out_dir.join("report.json")).unwrap(),
            std::fs::read(out_dir.join("report.txt")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,y,x1\n0.5,1.0,NaN\n0.2,1.0,2.0\n").unwrap();
    let out = vcselect(&["fit", path(&bad)], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x1"));

    let range = dir.path().join("range.csv");
    std::fs::write(&range, "t,y,x1\n1.5,1.0,1.0\n0.2,1.0,2.0\n").unwrap();
    assert_eq!(vcselect(&["fit", path(&range)], None).status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    assert_eq!(vcselect(&["fit", path(&missing)], None).status.code(), Some(2));
    assert_eq!(vcselect(&["simulate", "--p", "8", "--reps", "1"], None).status.code(), Some(2));
    assert_eq!(vcselect(&["fit", path(&bad), "--no-tune"], None).status.code(), Some(2));
    assert_eq!(vcselect(&["simulate", "--reps", "1"], Some("zero")).status.code(), Some(2));
    assert_eq!(vcselect(&["frobnicate"], None).status.code(), Some(2));
}
