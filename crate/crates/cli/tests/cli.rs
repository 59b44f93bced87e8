use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_superalg"));
    c.env_remove("SUPERALG_BUDGET");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.ends_with('\n'), "report not newline-terminated: {text:?}");
    serde_json::from_str(&text).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

const X: &str = r#"[["0.1","0.05*z[1]"],["0.02*z[2]","0.05"]]"#;
const Y: &str = r#"[["0.02 + 0.01*z[1,2]","0"],["0.1*z[3]","-0.1"]]"#;

#[test]
fn unknown_verb_is_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bch_report() {
    let out = run(&["bch", "--alg", "gl11", "--X", X, "--Y", Y, "--steps", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    for key in ["mu", "residual_exp_identity", "steps", "guard"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert!(r["residual_exp_identity"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["steps"], 200);
    assert_eq!(r["mu"]["p"], 1);
}

#[test]
fn bch_input_errors() {
    // odd-block entry with a body is not even
    let odd = r#"[["0.1","0.05"],["0","0.05"]]"#;
    assert_eq!(run(&["bch", "--alg", "gl11", "--X", odd, "--Y", Y]).status.code(), Some(2));
    let big = r#"[["2","0"],["0","0"]]"#;
    assert_eq!(run(&["bch", "--alg", "gl11", "--X", big, "--Y", Y]).status.code(), Some(2));
    let out = run(&["bch", "--alg", "gl11", "--X", "{\"p\": 1,", "--Y", Y]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1, column"));
    assert_eq!(run(&["bch", "--X", X, "--Y", Y]).status.code(), Some(2));
    // a residual threshold that cannot be met is a verification failure
    let out = run(&["bch", "--alg", "gl11", "--X", X, "--Y", Y, "--steps", "1", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn jacobi_on_gl11_shell() {
    let path = tmp("shell_gl11.json");
    let out = run(&["shell", "--alg", "gl11", "--budget", "4", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let shell: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(shell["field"], "C");
    let out = run(&["jacobi", "--constants", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["jacobi"]["max_residual"].as_f64(), Some(0.0));
    assert_eq!(r["conventional"], true);
}

#[test]
fn jacobi_failure_and_parse_errors() {
    let broken = tmp("broken.json");
    std::fs::write(
        &broken,
        r#"{"p":2,"q":0,"f":[{"M":1,"N":2,"K":1,"value":{"field":"R","budget":1,"terms":[{"index":[],"re":1}]}}]}"#,
    )
    .unwrap();
    let out = run(&["jacobi", "--constants", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["pass"], false);

    let bad = tmp("bad.json");
    std::fs::write(&bad, "{\"p\":1,\n\"q\":1,\n\"f\":[}").unwrap();
    let out = run(&["jacobi", "--constants", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(run(&["jacobi", "--constants", "/nonexistent/f.json"]).status.code(), Some(2));
}

#[test]
fn sweeps_are_deterministic() {
    let args = ["verify-exp-identity", "--alg", "gl11", "--samples", "5", "--budget", "6", "--seed", "42"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["verify-exp-identity", "--alg", "gl11", "--samples", "5", "--budget", "6", "--seed", "43"]);
    assert_ne!(a.stdout, other.stdout);
    let t1 = run(&["transition", "--alg", "gl11", "--samples", "2", "--budget", "6", "--seed", "1"]);
    let t2 = run(&["transition", "--alg", "gl11", "--samples", "2", "--budget", "6", "--seed", "1"]);
    assert_eq!(t1.status.code(), Some(0));
    assert_eq!(t1.stdout, t2.stdout);
}

#[test]
fn gsmooth_exit_codes() {
    let out = run(&["check-gsmooth", "--fixture", "square", "--order", "2", "--samples", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["pass"], true);
    let out = run(&["check-gsmooth", "--fixture", "body", "--samples", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["check-gsmooth", "--fixture", "square", "--order", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["refused"], true);
    assert_eq!(run(&["check-gsmooth", "--fixture", "nope"]).status.code(), Some(2));
}

#[test]
fn livf_passes() {
    let out = run(&["livf", "--alg", "gl21", "--samples", "5", "--budget", "6"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out)["max_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn eval_and_budget_env() {
    let out = run(&["eval", "--a", "2 - 3*z[1] + 0.5*z[1,2]", "--b", "z[2]", "--op", "mul"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["text"], "2*z[2] - 3*z[1,2]");
    assert_eq!(r["value"]["budget"], 8);
    let out = bin().env("SUPERALG_BUDGET", "4").args(["eval", "--a", "z[4]"]).output().unwrap();
    assert_eq!(report(&out)["value"]["budget"], 4);
    assert_eq!(report(&out)["parity"], "odd");
    // label beyond the budget, decreasing indices
    let out = bin().env("SUPERALG_BUDGET", "4").args(["eval", "--a", "z[5]"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["eval", "--a", "z[2,1]"]).status.code(), Some(2));
    let out = run(&["eval", "--a", "z[1,2]", "--op", "inv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn exp_and_log() {
    let out = run(&["exp", "--alg", "gl11", "--X", X]);
    assert_eq!(out.status.code(), Some(0));
    let e = report(&out);
    let path = tmp("exp.json");
    std::fs::write(&path, serde_json::to_string(&e["value"]).unwrap()).unwrap();
    let arg = format!("@{}", path.display());
    let out = run(&["exp", "--log", "--X", &arg]);
    assert_eq!(out.status.code(), Some(0));
    let back = report(&out);
    assert_eq!(back["value"]["p"], 1);
    let body = back["value"]["entries"][0][0]["terms"][0]["re"].as_f64().unwrap();
    assert!((body - 0.1).abs() < 1e-12);
}
