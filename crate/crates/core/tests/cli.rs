use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TRI3: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/tri3.json");

fn psps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psps"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solve(dir: &Path, name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(name);
    let mut args = vec!["solve", "--case", TRI3, "--out", path_str(&out)];
    args.extend_from_slice(extra);
    (psps(&args), out)
}

#[test]
fn solve_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--problem", "scops", "--alpha", "1", "--beta", "0.7", "--pflex", "1", "--threads", "1"];
    let (first, a) = solve(dir.path(), "a.json", &args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let (_, b) = solve(dir.path(), "b.json", &["--threads", "4"].iter().chain(&args[..8]).copied().collect::<Vec<_>>());
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("\"objective\": 1.1"), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = solve(dir.path(), "x.json", &["--problem", "ops", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let (out, _) = solve(dir.path(), "x.json", &["--problem", "ops", "--alpha", "1", "--solver", "bogus"]);
    assert_eq!(out.status.code(), Some(1));

    let missing = psps(&["solve", "--problem", "ops", "--alpha", "1", "--case", "/nonexistent.json", "--out", "/tmp/x"]);
    assert_eq!(missing.status.code(), Some(1));

    // A generator too small for the demand makes every plan infeasible.
    let mut net = psps::network::tri3();
    net.generators[0].p_max = 0.5;
    let case = dir.path().join("small.json");
    std::fs::write(&case, psps::case_io::write_network_json(&net)).unwrap();
    let out_path = dir.path().join("inf.json");
    let out = psps(&["solve", "--problem", "ops", "--alpha", "1", "--case", path_str(&case), "--out", path_str(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    let doc = std::fs::read_to_string(out_path).unwrap();
    assert!(doc.contains("\"status\": \"infeasible\""));

    let (out, _) = solve(dir.path(), "lim.json", &["--problem", "scops", "--alpha", "1", "--node-limit", "1"]);
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
}

#[test]
fn evaluate_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let (out, _) = solve(dir.path(), "plan.json", &["--problem", "ops", "--alpha", "1"]);
    assert!(out.status.success());
    let report = dir.path().join("eval.json");
    let csv = dir.path().join("eval.csv");
    let out = psps(&[
        "evaluate", "--case", TRI3, "--plan", path_str(&plan), "--pflex", "1",
        "--out", path_str(&report), "--csv", path_str(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert!((report["worst_case"]["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 4);

    let sweep = dir.path().join("sweep.json");
    let out = psps(&[
        "sweep", "--case", TRI3, "--alpha", "0.5:1:0.5", "--beta", "0,1", "--pflex", "1",
        "--out", path_str(&sweep),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sweep).unwrap()).unwrap();
    assert_eq!(sweep["cells"].as_array().unwrap().len(), 2);
}

#[test]
fn convert_and_riskgen() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case39.m");
    std::fs::write(&case, include_str!("data/case39.m")).unwrap();
    let risk = dir.path().join("risk.csv");
    let out = psps(&["riskgen", "--case", path_str(&case), "--seed", "42", "--out", path_str(&risk)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = dir.path().join("case39.json");
    let out = psps(&["convert", "--case", path_str(&case), "--risk", path_str(&risk), "--out", path_str(&json)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let net = psps::case_io::read_network_json(&std::fs::read_to_string(json).unwrap()).unwrap();
    let mut seeded = psps::case_io::read_case(include_str!("data/case39.m")).unwrap();
    psps::case_io::generate_risk(&seeded, 42).apply(&mut seeded).unwrap();
    for (a, b) in net.lines.iter().zip(&seeded.lines) {
        assert!((a.risk - b.risk).abs() < 1e-9);
    }
}
