use std::path::Path;
use std::process::{Command, Output};

use rehabxai_core::study::{AssessmentEvent, Condition, Phase};
use rehabxai_core::{Component, Label};
use serde_json::Value;

fn rehabxai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rehabxai")).args(args).env_remove("REHABXAI_STORE").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn generate(dir: &Path, name: &str, subjects: &str, seed: &str) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let o = rehabxai(&["generate", "--subjects", subjects, "--seed", seed, "--out", &path]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn generate_writes_twenty_trials_per_subject() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let o = rehabxai(&["generate", "--subjects", "15", "--seed", "7", "--out", out.to_str().unwrap(), "--json"]);
    assert_eq!(json(&o)["trials"], 300);
    let d: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(d["trials"].as_array().unwrap().len(), 300);
}

#[test]
fn generate_rejects_zero_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let o = rehabxai(&["generate", "--subjects", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!out.exists());
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.json", "4", "11");
    let b = generate(dir.path(), "b.json", "4", "11");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn evaluate_echoes_default_rom_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.json", "3", "2");
    let report = json(&rehabxai(&["evaluate", "--data", &data, "--component", "ROM", "--json"]));
    let c = &report["config"];
    assert_eq!((c["n_hidden_layers"].as_u64(), c["hidden_units"].as_u64()), (Some(3), Some(256)));
    assert_eq!(c["learning_rate"].as_f64(), Some(0.005));
    let predictions = report["loso"]["predictions"].as_array().unwrap();
    assert_eq!(predictions.len(), 60);
    assert!(predictions.iter().all(|p| p["right"].is_boolean()));
    assert!(report["loso"]["f1"].is_number());

    let text = stdout(&rehabxai(&["evaluate", "--data", &data, "--component", "ROM"]));
    assert!(text.contains("3x256 lr 0.005"), "{text}");
}

#[test]
fn grid_search_reports_sixty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.json", "3", "2");
    let report = json(&rehabxai(&[
        "evaluate",
        "--data",
        &data,
        "--component",
        "COMP",
        "--grid",
        "--epochs",
        "1",
        "--parallel",
        "--json",
    ]));
    let table = report["grid"]["table"].as_array().unwrap();
    assert_eq!(table.len(), 60);
    assert_eq!(report["config"], report["grid"]["best"]);
}

#[test]
fn train_saves_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.json", "3", "2");
    let out = dir.path().join("m.json");
    let o = rehabxai(&["train", "--data", &data, "--component", "COMP", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let model = rehabxai_core::TrainedModel::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!(model.is_trained());
}

#[test]
fn missing_inputs_exit_one() {
    assert_eq!(code(&rehabxai(&["evaluate", "--data", "/no/such/file.json", "--component", "ROM"])), 1);
    assert_eq!(code(&rehabxai(&["evaluate", "--component", "ROM"])), 1);
    assert_eq!(code(&rehabxai(&["analyze", "--sessions", "/no/such/log.jsonl"])), 1);
    assert_eq!(code(&rehabxai(&["serve"])), 1);
    assert_eq!(code(&rehabxai(&["--help"])), 0);
}

fn event(case: usize, phase: Phase, label: Label, ai: Label, truth: Label) -> AssessmentEvent {
    AssessmentEvent {
        session: "p1".into(),
        case: format!("c{case}"),
        component: Component::Rom,
        phase,
        label,
        t_video_start: 0.0,
        t_submit: if phase == Phase::Initial { 30.0 } else { 60.0 },
        condition: Condition::Features,
        ai_label: ai,
        ground_truth: truth,
    }
}

#[test]
fn analyze_reproduces_decision_ratios() {
    use Label::{Correct as C, Impaired as I};
    let mut events = Vec::new();
    let mut case = 0;
    // (count, ai, truth, final): agree-right, reject-wrong, agree-wrong, reject-right.
    for (n, ai, truth, fin) in [(8, I, I, I), (8, I, C, C), (1, I, C, I), (1, I, I, C)] {
        for _ in 0..n {
            events.push(event(case, Phase::Initial, C, ai, truth));
            events.push(event(case, Phase::Final, fin, ai, truth));
            case += 1;
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let lines: Vec<String> = events.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
    std::fs::write(&log, lines.join("\n")).unwrap();

    let o = rehabxai(&["analyze", "--sessions", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("44.4"), "{text}");
    assert!(text.contains("5.6"), "{text}");

    let report = json(&rehabxai(&["analyze", "--sessions", log.to_str().unwrap(), "--json"]));
    let d = &report["conditions"][0]["decisions"];
    assert!((d["agree_right"].as_f64().unwrap() - 8.0 / 18.0).abs() < 1e-12);
    assert_eq!(d["counts"]["reject_right"], 1);
}

#[test]
fn analyze_empty_log_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    std::fs::write(&log, "").unwrap();
    let o = rehabxai(&["analyze", "--sessions", log.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no complete sessions"));
}

#[test]
fn explain_gates_examples_by_condition() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.json", "3", "2");
    let full =
        json(&rehabxai(&["explain", "--data", &data, "--case", "S02-A-01", "--k", "4", "--method", "pca", "--json"]));
    assert_eq!(full["examples"]["rom"]["neighbors"].as_array().unwrap().len(), 4);
    assert_eq!(full["decision"].as_array().unwrap().len(), 2);
    let gated = json(&rehabxai(&[
        "explain",
        "--data",
        &data,
        "--case",
        "S02-A-01",
        "--method",
        "pca",
        "--condition",
        "FEATURES",
        "--json",
    ]));
    assert!(gated.get("examples").is_none());
    assert_eq!(gated["decision"], full["decision"]);
    assert_eq!(code(&rehabxai(&["explain", "--data", &data, "--case", "S99-A-01"])), 1);
    assert_eq!(code(&rehabxai(&["explain", "--data", &data, "--case", "S02-A-01", "--k", "0"])), 1);
}
