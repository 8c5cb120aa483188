//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any criterion fails.
//!
//! The binary doubles as the crash-test child: when `ACCEPTANCE_CRASH_CHILD`
//! names a store directory it saves in a tight loop until killed.

mod common;

use std::future::Future;
use std::path::Path;
use std::pin::Pin;
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use app_planner_core::catalog::Catalog;
use app_planner_core::clock::Timestamp;
use app_planner_core::fixtures::Fixture;
use app_planner_core::llm::{
    decode_reply, encode_request, ApiKey, ChatProvider, HttpProvider, Message, MockProvider, ModelRequest,
    ProviderConfig, ProviderError, ProviderMode, Role,
};
use app_planner_core::plan::{Project, SectionKind};
use app_planner_core::rubric::RubricEvaluator;
use app_planner_core::store::{CrashPoint, Event, EventKind, ProjectStore, StoredEnvelope};
use app_planner_core::study::{assign_conditions, Condition};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use common::start_with;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use serde_json::{json, Value};

const CHILD_ENV: &str = "ACCEPTANCE_CRASH_CHILD";
const DURABLE_ID: &str = "durable";

type Outcome = Result<String, String>;
type Check = Pin<Box<dyn Future<Output = Outcome>>>;
type Criterion = (&'static str, fn() -> Check);
type StubState = (Arc<Vec<u16>>, Arc<Mutex<usize>>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    if let Ok(dir) = std::env::var(CHILD_ENV) {
        crash_child(Path::new(&dir));
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let checks: Vec<Criterion> = vec![
        ("preset fidelity", || Box::pin(preset_fidelity())),
        ("routing invariant", || Box::pin(routing_invariant())),
        ("end-to-end mock flow", || Box::pin(end_to_end())),
        ("rubric determinism and extremes", || Box::pin(async { rubric_determinism() })),
        ("wire codec goldens and retry bound", || Box::pin(wire_codec())),
        ("durability", || Box::pin(async { durability() })),
        ("counterbalance", || Box::pin(counterbalance())),
        ("determinism replay", || Box::pin(replay())),
    ];
    let total = checks.len();
    let mut failed = 0;
    for (name, check) in checks {
        match rt.block_on(check()) {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{total} criteria, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}

async fn preset_fidelity() -> Outcome {
    let s = start_with(Arc::new(MockProvider::new(0)), None, None).await;
    let expected = [
        "How can I define a problem?",
        "Who are the target users?",
        "When and where do users encounter this problem?",
    ];
    let url = format!("{}/sections/define/presets", s.base);
    let first = s.client.get(&url).send().await.unwrap().bytes().await.unwrap();
    let second = s.client.get(&url).send().await.unwrap().bytes().await.unwrap();
    ensure!(first == second, "two reads differ");
    let body: Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let labels: Vec<&str> = body["presets"]
        .as_array()
        .ok_or("no presets array")?
        .iter()
        .filter_map(|p| p["label"].as_str())
        .collect();
    ensure!(labels == expected, "labels were {labels:?}");
    Ok(format!("{labels:?}"))
}

async fn transcript_len(s: &common::TestServer, id: &str) -> usize {
    let r = s.get(&format!("/projects/{id}/transcript")).await;
    r.body["messages"].as_array().map_or(usize::MAX, Vec::len)
}

async fn routing_invariant() -> Outcome {
    let mock = Arc::new(MockProvider::new(11));
    let s = start_with(mock.clone(), None, None).await;
    let id = s.create("LunchPal").await;
    let before = transcript_len(&s, &id).await;
    let script = [
        ("define", json!({"preset_id": "define.problem"})),
        ("define", json!({"text": "Who else has this lunch problem?"})),
        ("define", json!({"preset_id": "define.users"})),
        ("define", json!({"preset_id": "define.context"})),
        ("design", json!({"text": "Should the menu be a list or a chart?"})),
        ("design", json!({"preset_id": "design.features"})),
        ("positive_impact", json!({"preset_id": "positive.benefits"})),
        ("positive_impact", json!({"text": "How could teachers benefit?"})),
    ];
    let started = Instant::now();
    for (section, input) in &script {
        let r = s
            .post(&format!("/projects/{id}/chat"), json!({"section": section, "input": input}))
            .await;
        ensure!(r.status == 200, "chat returned {}: {}", r.status, r.body);
    }
    let elapsed = started.elapsed();
    let after = transcript_len(&s, &id).await;
    ensure!(mock.calls() == 3, "provider calls = {}", mock.calls());
    ensure!(after - before == 16, "transcript grew by {}", after - before);
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("3 calls, +16 messages in {elapsed:?}"))
}

async fn end_to_end() -> Outcome {
    let s = start_with(Arc::new(MockProvider::new(3)), None, None).await;
    let started = Instant::now();
    let mut summary = Vec::new();
    for fixture in [Fixture::LunchPlanner, Fixture::Translator] {
        let id = s.planner.seed_demo(fixture).await.map_err(|e| e.to_string())?.id().to_string();
        for input in [json!({"preset_id": "design.components"}), json!({"text": "Is a button enough?"})] {
            let r = s
                .post(&format!("/projects/{id}/chat"), json!({"section": "design", "input": input}))
                .await;
            ensure!(r.status == 200, "chat: {} {}", r.status, r.body);
        }
        let ev = s.post(&format!("/projects/{id}/evaluate"), json!({})).await;
        ensure!(ev.status == 200, "evaluate: {}", ev.body);
        let brief = s.get(&format!("/projects/{id}/brief")).await;
        ensure!(brief.status == 200, "brief: {}", brief.body);
        let export = s.post(&format!("/projects/{id}/export"), Value::Null).await;
        ensure!(export.status == 200, "export: {}", export.body);
        let instruction = export.body["instruction"].as_str().ok_or("no instruction")?;
        ensure!(instruction == brief.body["instruction"], "export and brief disagree");
        ensure!(instruction.starts_with("Make an app"), "instruction: {instruction}");
        if fixture == Fixture::Translator {
            ensure!(
                instruction.contains("text box") && instruction.contains("button"),
                "translator instruction: {instruction}"
            );
        }
        summary.push(format!("{fixture:?} ok"));
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(2), "took {elapsed:?}");
    Ok(format!("{} in {elapsed:?}", summary.join(", ")))
}

fn random_texts(n: usize) -> Vec<String> {
    const POOL: &[&str] = &[
        "students", "school", "lunch", "parents", "teachers", "because", "problem", "struggle", "at", "home",
        "during", "class", "button", "list", "screen", "menu", "text box", "shows", "add", "help", "save",
        "time", "risk", "privacy", "might", "could", "distraction", "benefit", "community", "the", "a",
    ];
    let word = prop_oneof![
        4 => proptest::sample::select(POOL).prop_map(str::to_string),
        1 => "[a-zA-Z]{1,9}",
        1 => "[ .,!?]{1,2}",
    ];
    let text = proptest::collection::vec(word, 0..60).prop_map(|w| w.join(" "));
    let mut runner = TestRunner::deterministic();
    (0..n).map(|_| text.new_tree(&mut runner).unwrap().current()).collect()
}

fn rubric_determinism() -> Outcome {
    let catalog = Catalog::default();
    let first = RubricEvaluator::new(&catalog);
    let second = RubricEvaluator::new(&catalog);
    let now = Timestamp(1_000);
    let base = Project::new("r", "Rubric", now).unwrap();
    let mut scored = 0;
    for (i, text) in random_texts(1000).iter().enumerate() {
        let kind = SectionKind::CHAT[i % 4];
        let p = base.update_section(kind, text, now).map_err(|e| e.to_string())?;
        let a = first.evaluate_section(&p, kind, now).map_err(|e| e.to_string())?;
        let b = second.evaluate_section(&p, kind, now).map_err(|e| e.to_string())?;
        let c = first.evaluate_section(&p, kind, now).map_err(|e| e.to_string())?;
        ensure!(a == b && a == c, "text {i} graded differently: {text:?}");
        scored += a.scores.iter().filter(|s| s.score > 0).count();
    }
    ensure!(scored > 0, "random corpus never scored above zero");

    for kind in SectionKind::CHAT {
        for blank in ["", "   ", "\n\t "] {
            let p = base.update_section(kind, blank, now).unwrap();
            let r = first.evaluate_section(&p, kind, now).unwrap();
            ensure!(r.scores.iter().all(|s| s.score == 0), "{kind} blank {blank:?} scored {:?}", r.scores);
            ensure!(!r.section_ready, "{kind} blank is ready");
        }
    }

    let lunch = Fixture::LunchPlanner.project("lunch", now).unwrap();
    let readiness = first.project_readiness(&lunch);
    ensure!(readiness.ready, "lunch fixture not ready: {:?}", readiness.failing());
    for kind in SectionKind::CHAT {
        let ablated = lunch.update_section(kind, "", now).unwrap();
        let failing = first.project_readiness(&ablated).failing();
        ensure!(failing == vec![kind], "blanking {kind} fails {failing:?}");
    }
    Ok(format!("1000 texts stable ({scored} non-zero scores), blanks zero, lunch ready, ablation exact"))
}

fn golden(name: &str) -> Vec<u8> {
    let path = format!("{}/../core/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn golden_requests() -> [(&'static str, ModelRequest); 3] {
    let basic = ModelRequest::new("m", vec![Message::new(Role::System, "s"), Message::new(Role::User, "u")]);
    let escaping = ModelRequest::new(
        "gpt-4o-mini",
        vec![
            Message::new(Role::System, "Quote: \"plan\"; path C:\\apps"),
            Message::new(Role::User, "line one\nline two\ttabbed, café / done \u{7}"),
        ],
    );
    let mut multiturn = ModelRequest::new(
        "coach-1",
        vec![
            Message::new(Role::System, "You coach students."),
            Message::new(Role::User, "What features should I add?"),
            Message::new(Role::Assistant, "Start with one core feature."),
            Message::new(Role::User, "A list of menus?"),
        ],
    );
    multiturn.temperature = 0.2;
    multiturn.max_tokens = 256;
    [
        ("request_basic.golden", basic),
        ("request_escaping.golden", escaping),
        ("request_multiturn.golden", multiturn),
    ]
}

/// Every JSON object in the tree, addressed as a JSON pointer.
fn object_pointers(v: &Value, at: String, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            out.push(at.clone());
            for (k, child) in map {
                object_pointers(child, format!("{at}/{k}"), out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                object_pointers(child, format!("{at}/{i}"), out);
            }
        }
        _ => {}
    }
}

async fn scripted_stub(statuses: Vec<u16>) -> (String, Arc<Mutex<usize>>) {
    const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"ok"},"finish_reason":"stop"}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#;
    let hits = Arc::new(Mutex::new(0usize));
    let state = (Arc::new(statuses), hits.clone());
    let app = Router::new()
        .route(
            "/v1/chat/completions",
            post(|State((statuses, hits)): State<StubState>, _body: Bytes| async move {
                let n = {
                    let mut h = hits.lock().unwrap();
                    *h += 1;
                    *h - 1
                };
                let status = statuses.get(n).or(statuses.last()).copied().unwrap_or(200);
                (StatusCode::from_u16(status).unwrap(), if status == 200 { OK } else { "{}" })
            }),
        )
        .with_state(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), hits)
}

async fn wire_codec() -> Outcome {
    for (name, req) in golden_requests() {
        ensure!(encode_request(&req) == golden(name), "{name} differs from golden bytes");
    }

    let sample = golden("reply_sample.json");
    let expected = decode_reply(&sample).map_err(|e| e.to_string())?;
    let original: Value = serde_json::from_slice(&sample).unwrap();
    let mut pointers = Vec::new();
    object_pointers(&original, String::new(), &mut pointers);
    for ptr in &pointers {
        let mut v = original.clone();
        let obj = v.pointer_mut(ptr).and_then(Value::as_object_mut).unwrap();
        obj.insert("x_unknown".into(), json!({"nested": [1, {"deep": null}]}));
        let got = decode_reply(&serde_json::to_vec(&v).unwrap()).map_err(|e| format!("at `{ptr}`: {e}"))?;
        ensure!(got == expected, "injection at `{ptr}` changed the decoded reply");
    }

    let request = ModelRequest::new("m", vec![Message::new(Role::System, "s"), Message::new(Role::User, "u")]);
    let mut attempts = Vec::new();
    for (statuses, want_ok, want_hits) in [(vec![500, 500, 200], true, 3), (vec![401], false, 1)] {
        let (url, hits) = scripted_stub(statuses.clone()).await;
        let provider = HttpProvider::new(ProviderConfig {
            base_url: url,
            api_key: ApiKey::new("sk-acceptance"),
            mode: ProviderMode::Live,
            timeout_ms: 2_000,
            backoff_base_ms: 10,
            ..Default::default()
        })
        .map_err(|e| e.to_string())?;
        let result = provider.complete(&request).await;
        let n = *hits.lock().unwrap();
        ensure!(result.is_ok() == want_ok, "{statuses:?}: {result:?}");
        if !want_ok {
            ensure!(
                result == Err(ProviderError::Rejected { status: 401 }),
                "{statuses:?}: {result:?}"
            );
        }
        ensure!(n == want_hits, "{statuses:?}: {n} attempts, expected {want_hits}");
        attempts.push(format!("{statuses:?}->{n}"));
    }
    Ok(format!(
        "3 goldens exact, {} injection sites tolerated, attempts {}",
        pointers.len(),
        attempts.join(" ")
    ))
}

fn durable_envelope() -> StoredEnvelope {
    let project = Fixture::LunchPlanner.project(DURABLE_ID, Timestamp(0)).unwrap();
    StoredEnvelope::create(project)
}

/// Child side of the kill test: grows and saves the envelope until killed.
fn crash_child(dir: &Path) -> ! {
    let store = ProjectStore::open(dir).expect("child opens store");
    let mut env = store.load(DURABLE_ID).expect("child loads");
    let mut n = env.events.len() as i64;
    loop {
        n += 1;
        let kind = SectionKind::CHAT[n as usize % 4];
        let text = format!("{} revision {n}", env.project.text(kind));
        env.project = env.project.update_section(kind, &text, Timestamp(n)).unwrap();
        env.record(Event::new(Timestamp(n), EventKind::SectionUpdated, json!({"section": kind, "n": n})));
        store.save(&env).expect("child save");
    }
}

fn is_prefix(shorter: &[Event], longer: &[Event]) -> bool {
    shorter.len() <= longer.len() && longer[..shorter.len()] == *shorter
}

fn durability() -> Outcome {
    // Round trip and prefix stability.
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    let mut env = durable_envelope();
    let mut previous: Option<StoredEnvelope> = None;
    for i in 0..20 {
        env.record(Event::new(Timestamp(i), EventKind::RubricRun, json!({"i": i})));
        store.save(&env).map_err(|e| e.to_string())?;
        let loaded = store.load(DURABLE_ID).map_err(|e| e.to_string())?;
        ensure!(loaded == env, "round trip {i} changed the envelope");
        if let Some(prev) = &previous {
            ensure!(is_prefix(&prev.events, &loaded.events), "log {i} is not an extension");
        }
        previous = Some(loaded);
    }

    // Deterministic crash points.
    let committed = store.load(DURABLE_ID).unwrap();
    let mut next = committed.clone();
    next.record(Event::new(Timestamp(99), EventKind::BriefExported, json!({})));
    for point in [
        CrashPoint::PartialTempWrite(0),
        CrashPoint::PartialTempWrite(17),
        CrashPoint::PartialTempWrite(4096),
        CrashPoint::BeforeRename,
    ] {
        let _ = store.save_interrupted(&next, point);
        let reopened = ProjectStore::open(dir.path()).map_err(|e| e.to_string())?;
        let loaded = reopened.load(DURABLE_ID).map_err(|e| format!("{point:?}: {e}"))?;
        ensure!(loaded == committed, "{point:?} exposed a partial save");
    }

    // Real kills of a child process that saves in a loop.
    let dir = tempfile::tempdir().unwrap();
    ProjectStore::open(dir.path()).unwrap().save(&durable_envelope()).unwrap();
    let exe = std::env::current_exe().unwrap();
    let mut last = durable_envelope();
    let mut grew = 0;
    for trial in 0..100u64 {
        let mut child = Command::new(&exe)
            .env(CHILD_ENV, dir.path())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        std::thread::sleep(Duration::from_micros(2_000 + (trial * 7_919) % 25_000));
        let _ = child.kill();
        let _ = child.wait();
        let store = ProjectStore::open(dir.path()).map_err(|e| format!("trial {trial}: {e}"))?;
        let loaded = store.load(DURABLE_ID).map_err(|e| format!("trial {trial}: {e}"))?;
        loaded.check_invariants().map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(is_prefix(&last.events, &loaded.events), "trial {trial}: log lost a committed prefix");
        let listed = store.list_projects().map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(listed.len() == 1, "trial {trial}: listed {}", listed.len());
        if loaded.events.len() > last.events.len() {
            grew += 1;
        }
        last = loaded;
    }
    ensure!(grew > 0, "the child never committed a save; kills did not overlap writes");
    Ok(format!(
        "20 round trips, 4 crash points, 100 kills ({grew} advanced, final log {} events)",
        last.events.len()
    ))
}

async fn counterbalance() -> Outcome {
    use Condition::*;
    let ids = |prefix: &str, n: usize| (1..=n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    let s = start_with(Arc::new(MockProvider::new(0)), None, None).await;
    let r = s
        .post("/study/assign", json!({"participant_ids": ids("P", 5), "task_ids": ["T1", "T2"]}))
        .await;
    ensure!(r.status == 200, "assign: {}", r.body);
    let got: Vec<(String, String, String)> = r.body["assignments"]
        .as_array()
        .ok_or("no assignments")?
        .iter()
        .map(|a| {
            (
                a["participant_id"].as_str().unwrap_or("").to_string(),
                a["tasks"][0]["condition"].as_str().unwrap_or("").to_string(),
                a["tasks"][1]["condition"].as_str().unwrap_or("").to_string(),
            )
        })
        .collect();
    let want: Vec<(String, String, String)> = [
        ("P1", "Unaided", "Aided"),
        ("P2", "Unaided", "Aided"),
        ("P3", "Unaided", "Aided"),
        ("P4", "Aided", "Unaided"),
        ("P5", "Aided", "Unaided"),
    ]
    .iter()
    .map(|(p, a, b)| (p.to_string(), a.to_string(), b.to_string()))
    .collect();
    ensure!(got == want, "five-participant split was {got:?}");

    for n in 1..=50 {
        let a = assign_conditions(&ids("P", n), &ids("T", 2)).map_err(|e| e.to_string())?;
        ensure!(a.len() == n, "n={n}: {} assignments", a.len());
        for task in 0..2 {
            let aided = a.iter().filter(|x| x.tasks[task].condition == Aided).count() as i64;
            ensure!((2 * aided - n as i64).abs() <= 1, "n={n} task {task}: {aided} aided");
        }
        for x in &a {
            let aided = x.tasks.iter().filter(|t| t.condition == Aided).count();
            ensure!(aided == 1, "n={n}: {} has {aided} aided tasks", x.participant_id);
        }
    }
    Ok("P1-P3 unaided first, P4-P5 aided first; balanced for n in 1..=50".into())
}

async fn replay_once(seed: u64) -> Result<Vec<u8>, String> {
    let s = start_with(Arc::new(MockProvider::new(seed)), None, None).await;
    let id = s.create("English Helper").await;
    for (kind, text) in Fixture::Translator.sections() {
        let r = s
            .patch(&format!("/projects/{id}/sections/{}", kind.as_str()), json!({"text": text}))
            .await;
        ensure!(r.status == 200, "patch: {}", r.body);
    }
    let script = [
        ("define", json!({"preset_id": "define.users"})),
        ("define", json!({"text": "How do I describe where parents get stuck?"})),
        ("design", json!({"text": "Is a text box enough?"})),
        ("design", json!({"text": "What should the button do?"})),
        ("negative_impact", json!({"preset_id": "negative.privacy"})),
        ("negative_impact", json!({"text": "my number is 555-123-4567"})),
    ];
    for (section, input) in script {
        s.post(&format!("/projects/{id}/chat"), json!({"section": section, "input": input}))
            .await;
    }
    s.post(&format!("/projects/{id}/evaluate"), json!({})).await;
    s.post(&format!("/projects/{id}/export"), Value::Null).await;
    Ok(s.file_bytes(&id))
}

async fn replay() -> Outcome {
    let a = replay_once(42).await?;
    let b = replay_once(42).await?;
    ensure!(a == b, "replays differ ({} vs {} bytes)", a.len(), b.len());
    let env: StoredEnvelope = serde_json::from_slice(&a).map_err(|e| e.to_string())?;
    ensure!(env.transcripts.len() == 12, "transcript has {} messages", env.transcripts.len());
    Ok(format!("{} bytes identical across two runs", a.len()))
}
