use std::process::{Command, Output};

use serde_json::Value;

fn pshlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pshlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn classify_gallery_points() {
    let out = pshlab(&["classify", "--gallery", "omega_local:k=3", "--point", "0,0,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "pshlab-report/1");
    assert_eq!(v["result"]["type_report"]["c_p"]["finite"], 6);

    let v = json(&pshlab(&["classify", "--gallery", "model:a=1.2"]));
    assert_eq!(v["result"]["type_report"]["strict4"], "strict");

    let v = json(&pshlab(&["classify", "--field", "u+x^2+y^2"]));
    assert_eq!(v["result"]["type_report"]["c_p"]["finite"], 2);
}

#[test]
fn classify_non_pseudoconvex_exits_two() {
    let out = pshlab(&["classify", "--field", "u + $a*absz2*(x^2-y^2) + absz2^2", "--param", "a=1.4"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["result"]["type_report"]["pseudoconvex"], "no");
}

#[test]
fn certify_exit_codes() {
    let out = pshlab(&["certify", "psh-boundary", "--gallery", "tanlog", "--multiplier", "y+u", "--samples", "400"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["certificate"]["verdict"], "pass");

    let out = pshlab(&["certify", "psh-boundary", "--gallery", "omega_local:k=3", "--samples", "400"]);
    assert_eq!(out.status.code(), Some(2));
    let c = &json(&out)["result"]["certificate"];
    assert_eq!(c["verdict"], "fail");
    assert!(!c["witnesses"].as_array().unwrap().is_empty());

    let out = pshlab(&["certify", "sesqui", "--field", "u+x^2+y^2", "--samples", "400"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn construct_writes_the_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.txt");
    let out = pshlab(&[
        "construct",
        "strict4",
        "--field",
        "u+absz2^2",
        "--samples",
        "400",
        "--field-out",
        h.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let src = std::fs::read_to_string(&h).unwrap();
    assert!(!src.trim().is_empty());
    // the written field is valid input again
    let out = pshlab(&["certify", "cond-ln", "--field", "u+absz2^2", "--multiplier", src.trim(), "--samples", "400"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn strict4_on_weak_type4_point_is_a_math_failure() {
    let out = pshlab(&["construct", "strict4", "--gallery", "tanlog"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strict type 4"));
}

#[test]
fn operational_errors_exit_one() {
    assert_eq!(pshlab(&["classify", "--field", "u+"]).status.code(), Some(1));
    assert_eq!(pshlab(&["certify", "nope", "--field", "u"]).status.code(), Some(1));
    assert_eq!(pshlab(&["classify", "--gallery", "unknown"]).status.code(), Some(1));
    assert_eq!(pshlab(&["classify", "--field", "u", "--samples", "3"]).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_pshlab"))
        .args(["gallery", "list"])
        .env("PSHLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn suite_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for (path, threads) in [(&a, "1"), (&b, "2")] {
        let out = Command::new(env!("CARGO_BIN_EXE_pshlab"))
            .args(["suite", "--samples", "300", "--seed", "5", "--out", path.to_str().unwrap()])
            .env("PSHLAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn suite_emits_plot_slices() {
    let dir = tempfile::tempdir().unwrap();
    let plots = dir.path().join("plots");
    let out = pshlab(&["suite", "--samples", "300", "--emit-plots", plots.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(plots.join("lambda_tanlog.csv")).unwrap();
    assert!(csv.starts_with("x,v,u,lambda"));
}

#[test]
fn gallery_list() {
    let v = json(&pshlab(&["gallery", "list"]));
    let entries = v["result"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 5);
    assert!(entries.iter().all(|e| !e["claims"].as_array().unwrap().is_empty()));
}
