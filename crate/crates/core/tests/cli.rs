use std::path::Path;
use std::process::{Command, Output};

fn ppoisson(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppoisson"))
        .args(args)
        .arg("-o")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn context_prints_derived_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let o = ppoisson(&["context", "-q", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["regime"], "critical");
    assert!(v["sharp_exponent"].is_null());
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ppoisson(&["solve", "-p", "3"], dir.path()).status.code(), Some(2));
    assert_eq!(ppoisson(&["iterate", "-q", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(ppoisson(&["solve", "--r-nodes", "8"], dir.path()).status.code(), Some(2));
    assert_eq!(ppoisson(&["solve", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(ppoisson(&["solve", "--source-power", "1"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = ppoisson(&["solve", "--residual-bound", "1e-30", "--source-power", "1,1"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("residual"));
    assert!(dir.path().join("residual.json").exists());
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = ppoisson(&["solve"], &blocker.join("sub"));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn malformed_source_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("f.csv");
    let mut text = String::from("# source\nr,f\n");
    for i in 1..=100 {
        text.push_str(&format!("{},1\n", i as f64 / 100.0));
    }
    text.push_str("0.5,oops\n");
    std::fs::write(&src, text).unwrap();
    let o = ppoisson(&["solve", "--source-file", src.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 103"), "{}", stderr(&o));
}

#[test]
fn sampled_source_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("f.csv");
    let mut text = String::from("r,f\n");
    for i in 1..=200 {
        text.push_str(&format!("{},1\n", i as f64 / 200.0));
    }
    std::fs::write(&src, text).unwrap();
    let o = ppoisson(&["solve", "--source-file", src.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["closed_form_gap"].is_null());
    assert!(v["residual_max"].as_f64().unwrap() < 1e-4);
}

#[test]
fn tables_carry_config_trailer() {
    let dir = tempfile::tempdir().unwrap();
    let o = ppoisson(&["analyze", "--r-exps", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("norms.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r_exp,direct,layer_cake,relative_gap,status"));
    let (rows, trailer): (Vec<&str>, Vec<&str>) = lines.partition(|l| !l.starts_with('#'));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",ok")));
    assert_eq!(trailer[0], "# config:");
    let json: String = trailer[1..].iter().map(|l| &l[2..]).collect::<Vec<_>>().join("\n");
    let cfg: ppoisson::cli::ExperimentConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(cfg.r_exps, vec![1.0, 2.0]);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"context": {"n": 4, "p": 3.0, "q": 1.1}, "epsilon": 0.5}"#).unwrap();
    let o = ppoisson(&["sharpness", "--config", path.to_str().unwrap(), "--r-grid", "11,12,12.5,14"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(v["within_resolution"].as_bool().unwrap());
    assert!(dir.path().join("sweep.csv").exists() && dir.path().join("verdict.json").exists());
}
