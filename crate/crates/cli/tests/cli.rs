use std::process::Command;

use fastslow_cli::{
    run, EXIT_INPUT, EXIT_NOT_BISIMULATION, EXIT_NOT_EQUIVALENT, EXIT_OK, EXIT_SHORTCUT,
    EXIT_STATE_CAP,
};

const MODELS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/");

fn m(name: &str) -> String {
    format!("{MODELS}{name}")
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn fastslow(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["fastslow"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

#[test]
fn lts_counts_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("sys.json");
    let r = fastslow(&[
        "lts",
        &m("inhibition.bio"),
        "--format",
        "json",
        "--out",
        json.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert_eq!(r.out.trim(), "18 states, 36 transitions");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["states"].as_array().unwrap().len(), 18);
    assert_eq!(v["transitions"].as_array().unwrap().len(), 36);

    let dot = dir.path().join("red.dot");
    let r = fastslow(&[
        "lts",
        &m("inhibition_reduced.bio"),
        "--out",
        dot.to_str().unwrap(),
    ]);
    assert_eq!(r.out.trim(), "6 states, 5 transitions");
    assert!(std::fs::read_to_string(&dot)
        .unwrap()
        .starts_with("digraph"));

    let r = fastslow(&[
        "lts",
        &m("inhibition_reduced.bio"),
        "--config",
        &m("inhibition.cfg"),
    ]);
    assert!(r.out.contains("[label=\"gamma; P:>>(0,1)\"]"), "{}", r.out);
}

#[test]
fn malformed_model_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bio");
    std::fs::write(&bad, "max A = 1;\nspecies A = (a,1) << ;\nsystem = A[0];\n").unwrap();
    let r = fastslow(&["lts", bad.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("bad.bio:2:22:"), "{}", r.err);

    let r = fastslow(&["lts", &m("missing.bio")]);
    assert_eq!(r.code, EXIT_INPUT);
    assert_eq!(fastslow(&["frobnicate"]).code, EXIT_INPUT);
}

#[test]
fn state_cap() {
    let r = fastslow(&["lts", &m("inhibition.bio"), "--max-states", "5"]);
    assert_eq!(r.code, EXIT_STATE_CAP);
    assert!(r.err.contains("5 states"));
}

#[test]
fn check_verdicts() {
    let cfg = m("inhibition.cfg");
    let r = fastslow(&[
        "check",
        &m("inhibition.bio"),
        &m("inhibition_reduced.bio"),
        "--config",
        &cfg,
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("verdict: equivalent"));

    let r = fastslow(&[
        "check",
        &m("s1_with_s.bio"),
        &m("s2_with_s.bio"),
        "--config",
        &m("s1s2.cfg"),
    ]);
    assert_eq!(r.code, EXIT_NOT_EQUIVALENT);
    assert!(r.out.contains("not-equivalent"));
    assert!(r.out.contains("has no matching answer"));

    let r = fastslow(&[
        "check",
        &m("inhibition.bio"),
        &m("inhibition_reduced.bio"),
        "--config",
        &cfg,
        "--mode",
        "slow",
    ]);
    assert_eq!(r.code, EXIT_OK);
}

#[test]
fn relations_round_trip_and_bad_relations() {
    let dir = tempfile::tempdir().unwrap();
    let rel = dir.path().join("rel.json");
    let cfg = m("inhibition.cfg");
    let (a, b) = (m("inhibition.bio"), m("inhibition_reduced.bio"));
    let r = fastslow(&[
        "check",
        &a,
        &b,
        "--config",
        &cfg,
        "--write-relation",
        rel.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK);
    let r = fastslow(&[
        "check",
        &a,
        &b,
        "--config",
        &cfg,
        "--relation",
        rel.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);

    std::fs::write(&rel, "[[[5,3,0,0,0,0],[4,3,0,1]]]").unwrap();
    let r = fastslow(&[
        "check",
        &a,
        &b,
        "--config",
        &cfg,
        "--relation",
        rel.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_NOT_BISIMULATION);
    assert!(r.out.contains("gamma"), "{}", r.out);

    std::fs::write(&rel, "[[[9,9,9,9,9,9],[4,3,0,1]]]").unwrap();
    let r = fastslow(&[
        "check",
        &a,
        &b,
        "--config",
        &cfg,
        "--relation",
        rel.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("not a state"));
}

#[test]
fn unpartitioned_action_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "fast: alpha1, alpha_1, beta1, beta_1\n").unwrap();
    let r = fastslow(&[
        "check",
        &m("inhibition.bio"),
        &m("inhibition_reduced.bio"),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("gamma"));
}

#[test]
fn shortcut_mode() {
    let cfg = m("inhibition.cfg");
    let rel = m("inhibition_slow_relation.json");
    let (a, b) = (m("inhibition.bio"), m("inhibition_reduced.bio"));
    let r = fastslow(&[
        "check",
        &a,
        &b,
        "--config",
        &cfg,
        "--mode",
        "shortcut",
        "--relation",
        &rel,
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("slow variables: P"));

    // the second model must have no fast variables
    let r = fastslow(&[
        "check",
        &b,
        &a,
        "--config",
        &cfg,
        "--mode",
        "shortcut",
        "--relation",
        &rel,
    ]);
    assert_eq!(r.code, EXIT_SHORTCUT);
    assert!(r.err.contains("second model has fast variables"));

    let dir = tempfile::tempdir().unwrap();
    let shifted = dir.path().join("shifted.json");
    std::fs::write(&shifted, "[[[0,0,0],[1]]]").unwrap();
    let r = fastslow(&[
        "check",
        &a,
        &b,
        "--config",
        &cfg,
        "--mode",
        "shortcut",
        "--relation",
        shifted.to_str().unwrap(),
    ]);
    assert_eq!(r.code, EXIT_SHORTCUT);
    assert!(r.err.contains("slow coordinates differ"));

    let r = fastslow(&["check", &a, &b, "--config", &cfg, "--mode", "shortcut"]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn classify_reports() {
    let r = fastslow(&[
        "classify",
        &m("inhibition.bio"),
        "--config",
        &m("inhibition.cfg"),
    ]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("slow:      P\n"));
    assert!(r.out.contains("fast:      EI, SE\n"));

    let r = fastslow(&[
        "classify",
        &m("all_fast.bio"),
        "--config",
        &m("all_fast.cfg"),
    ]);
    assert_eq!(r.code, EXIT_SHORTCUT);

    // reordering changes the presentation, not the span sizes
    let r = fastslow(&[
        "classify",
        &m("inhibition.bio"),
        "--config",
        &m("inhibition.cfg"),
        "--json",
        "--species-order",
        "SE,EI,P,I,E,S",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let v: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["species"][0], "SE");
    assert_eq!(v["conserved"].as_array().unwrap().len(), 3);
    assert_eq!(v["slow"][0]["species"], "P");

    let r = fastslow(&[
        "classify",
        &m("inhibition.bio"),
        "--config",
        &m("inhibition.cfg"),
        "--species-order",
        "S,E",
    ]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn congruence_reports() {
    let r = fastslow(&[
        "congruence",
        &m("c1.bio"),
        &m("c2.bio"),
        &m("c.bio"),
        "--config",
        &m("c1c2.cfg"),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("side condition: holds"));

    let r = fastslow(&[
        "congruence",
        &m("s1.bio"),
        &m("s2.bio"),
        &m("s.bio"),
        "--config",
        &m("s1s2.cfg"),
    ]);
    assert_eq!(r.code, EXIT_NOT_EQUIVALENT);
    assert!(r.out.contains("shared fast actions (p1, q): {alpha}"));
    assert!(r.out.contains("p1 vs p2: equivalent"));
    assert!(r.out.contains("p1 <*> q vs p2 <*> q: not-equivalent"));
}

#[test]
fn extend_prints_a_model() {
    let r = fastslow(&["extend", &m("c1.bio"), &m("c.bio")]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(
        r.out.contains(
            "species C1{C} = (alpha,1) >> C1{C} + (gamma,1) << C1{C} + (delta,1) >> C1{C};"
        ),
        "{}",
        r.out
    );
    fastslow::parser::parse_model(&r.out).unwrap();

    let r = fastslow(&["extend", &m("c1.bio"), &m("c2.bio")]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn deterministic_reports_are_identical() {
    let args = [
        "check",
        &m("inhibition.bio"),
        &m("inhibition_reduced.bio"),
        "--config",
        &m("inhibition.cfg"),
        "--json",
        "--deterministic",
    ]
    .map(|s| s.to_string());
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let first = fastslow(&args);
    let second = fastslow(&args);
    assert_eq!(first.out, second.out);
    let v: serde_json::Value = serde_json::from_str(&first.out).unwrap();
    assert_eq!(v["verdict"], "equivalent");
    assert_eq!(v["states"], serde_json::json!([18, 6]));
    assert!(v.get("elapsed_ms").is_none());
    assert_eq!(v["inputs"].as_object().unwrap().len(), 3);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fastslow");
    let status = Command::new(bin)
        .args([
            "congruence",
            &m("s1.bio"),
            &m("s2.bio"),
            &m("s.bio"),
            "--config",
            &m("s1s2.cfg"),
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_NOT_EQUIVALENT));
    let status = Command::new(bin)
        .args(["lts", &m("inhibition.bio"), "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
}
