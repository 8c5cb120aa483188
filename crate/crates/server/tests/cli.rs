//! The `app-planner` binary end to end against a temporary store.

use std::process::{Command, Output};

const SECRET: &str = "sk-test-do-not-print-0123456789";

fn run(store: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_app-planner"))
        .args(args)
        .env("APP_PLANNER_STORE_DIR", store)
        .env("APP_PLANNER_LLM_KEY", SECRET)
        .env("APP_PLANNER_LLM_MODE", "mock")
        .env("RUST_LOG", "debug")
        .output()
        .unwrap()
}

fn text(o: &Output) -> (String, String) {
    (String::from_utf8_lossy(&o.stdout).into_owned(), String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn seed_export_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let seeded = run(dir.path(), &["seed-demo"]);
    let (out, err) = text(&seeded);
    assert!(seeded.status.success(), "{err}");
    let id = out.trim().to_string();
    assert!(!id.is_empty() && !err.contains(SECRET));

    let brief_path = dir.path().join("brief.json");
    let exported = run(dir.path(), &["export", &id, "--out", brief_path.to_str().unwrap()]);
    let (out, err) = text(&exported);
    assert!(exported.status.success(), "{err}");
    assert!(out.contains("\nMake an app called LunchPal that addresses this problem:"), "{out}");
    assert!(!out.contains(SECRET) && !err.contains(SECRET));
    let saved: serde_json::Value = serde_json::from_slice(&std::fs::read(&brief_path).unwrap()).unwrap();
    assert_eq!(saved["brief"]["app_name"], "LunchPal");

    let metrics = run(dir.path(), &["metrics", &id]);
    let (out, err) = text(&metrics);
    assert!(metrics.status.success(), "{err}");
    let m: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(m["per_section_edit_counts"]["negative_impact"], 1);
    assert_eq!(m["chat_turns"], 0);

    let store_file = std::fs::read_to_string(dir.path().join(format!("{id}.plan"))).unwrap();
    assert!(store_file.contains("\"brief_exported\""));
    assert!(!store_file.contains(SECRET));
}

#[test]
fn translator_fixture_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let seeded = run(dir.path(), &["seed-demo", "--fixture", "translator"]);
    let id = text(&seeded).0.trim().to_string();
    let (out, _) = text(&run(dir.path(), &["export", &id]));
    assert!(out.contains("text box") && out.contains("button"), "{out}");

    let missing = run(dir.path(), &["export", "ghost"]);
    assert!(!missing.status.success());
    assert!(text(&missing).1.contains("ghost"));

    let live_without_key = Command::new(env!("CARGO_BIN_EXE_app-planner"))
        .args(["--llm-mode", "live", "metrics", &id])
        .env("APP_PLANNER_STORE_DIR", dir.path())
        .env_remove("APP_PLANNER_LLM_KEY")
        .output()
        .unwrap();
    assert!(!live_without_key.status.success());
    assert!(text(&live_without_key).1.contains("API key"));
}
