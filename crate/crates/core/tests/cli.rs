use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use efsep::cli::{parse_scenario, text_verdicts, Scenario};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_efsep"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn efsep")
}

fn tmp(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("efsep-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn every_shipped_scenario_passes() {
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            let out = run(&["run", p.to_str().unwrap()]);
            assert_eq!(out.status.code(), Some(0), "{}: {}", p.display(), String::from_utf8_lossy(&out.stdout));
        }
    }
}

#[test]
fn failed_expectation_exits_one() {
    let p = tmp(
        "wrong.json",
        r#"{"kind":"game","left":{"gens":1,"relations":[[2]]},"right":{"gens":1,"relations":[[3]]},
            "tree":{"parents":[null]},"expect_winner":"exists"}"#,
    );
    let out = run(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("FAIL"));
    assert_eq!(text_verdicts(&text), vec![true, false]);
}

#[test]
fn bad_input_exits_two() {
    let bad = tmp("bad.json", r#"{"kind":"game","left":{"gens":1},"oops":1}"#);
    let missing = scenarios().join("does-not-exist.json");
    let ragged = tmp(
        "ragged.json",
        r#"{"kind":"game","left":{"gens":2,"relations":[[2]]},"right":{"gens":1},"tree":{"parents":[null]}}"#,
    );
    let cyclic = tmp(
        "cyclic.json",
        r#"{"kind":"game","left":{"gens":1,"relations":[[2]]},"right":{"gens":1,"relations":[[2]]},"tree":{"parents":[1,0]}}"#,
    );
    for p in [&bad, &missing, &ragged, &cyclic] {
        assert_eq!(run(&["run", p.to_str().unwrap()]).status.code(), Some(2), "{}", p.display());
    }
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn infinite_group_in_a_game_is_a_schema_error() {
    let p = tmp(
        "free.json",
        r#"{"kind":"game","left":{"gens":1},"right":{"gens":1},"tree":{"parents":[null]}}"#,
    );
    assert_eq!(run(&["run", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let suite = scenarios().join("suite.json");
    let s = suite.to_str().unwrap();
    for format in ["text", "json"] {
        let a = run(&["--format", format, "--seed", "5", "run", s]);
        let b = run(&["--format", format, "--seed", "5", "run", s]);
        assert_eq!(a.stdout, b.stdout);
        assert_eq!(a.status.code(), Some(0));
    }
}

#[test]
fn json_and_text_agree() {
    let suite = scenarios().join("suite.json");
    let s = suite.to_str().unwrap();
    let text = String::from_utf8(run(&["run", s]).stdout).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&run(&["--format", "json", "run", s]).stdout).unwrap();
    fn walk(v: &serde_json::Value, out: &mut Vec<bool>) {
        for c in v["checks"].as_array().unwrap() {
            out.push(c["passed"].as_bool().unwrap());
        }
        for c in v.get("children").and_then(|c| c.as_array()).into_iter().flatten() {
            walk(c, out);
        }
    }
    let mut from_json = Vec::new();
    walk(&json, &mut from_json);
    assert_eq!(text_verdicts(&text), from_json);
    assert!(from_json.len() > 20 && from_json.iter().all(|&b| b));
}

#[test]
fn seed_flag_overrides_file_seeds() {
    let p = scenarios().join("game_z2_z3.json");
    let out = run(&["--seed", "99", "run", p.to_str().unwrap()]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("seed=99"));
}

#[test]
fn tiny_budget_fails_cleanly() {
    let p = scenarios().join("game_z6_z6.json");
    let out = run(&["--max-states", "3", "run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("pipeline"));
}

#[test]
fn parses_every_kind() {
    let dir = scenarios();
    let kinds: Vec<&str> = ["game_z2_z3.json", "build_plan5.json", "equiv_family.json", "suite.json"]
        .iter()
        .map(|f| parse_scenario(&std::fs::read_to_string(dir.join(f)).unwrap()).unwrap().kind())
        .collect();
    assert_eq!(kinds, vec!["game", "build", "equivalence", "suite"]);
    assert!(matches!(
        parse_scenario(r#"{"kind":"suite","scenarios":[{"kind":"game","left":{"gens":1},"right":{"gens":1},"tree":{"parents":[]}}]}"#),
        Ok(Scenario::Suite(_))
    ));
    assert!(parse_scenario(r#"{"kind":"nope"}"#).is_err());
}

fn play(side: &str, input: &str, extra: &[&str]) -> Output {
    let p = scenarios().join("play");
    let mut child = bin()
        .args(["play", "--side", side, "--tree"])
        .arg(p.join("chain2.json"))
        .arg("--left")
        .arg(p.join("z4.json"))
        .arg("--right")
        .arg(p.join("z2xz2.json"))
        .args(extra)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn play_as_forall_reprompts_and_finishes() {
    let out = play("forall", "9 left 1\n0 sideways 1\n0 left 1\n1 left 2\n", &["--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("illegal:").count(), 2);
    let json_start = text.find("{\n").unwrap();
    let t: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert_eq!(t["moves"].as_array().unwrap().len(), 2);
    // ∀ wins Z/4 against Z/2 ⊕ Z/2 in two rounds; the machine cannot save ∃
    assert_eq!(t["verdict"], "forall_wins");
}

#[test]
fn play_abandons_on_eof_and_writes_transcript() {
    let dest = std::env::temp_dir().join(format!("efsep-transcript-{}.json", std::process::id()));
    let out = play("exists", "#2\n", &["--transcript", dest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(t["verdict"], "abandoned");
    assert_eq!(t["moves"].as_array().unwrap().len(), 1);
}
