//! The HTTP surface. Bodies are JSON; every error uses the [`ApiError`]
//! envelope, including malformed bodies and unknown routes.

use std::collections::BTreeMap;
use std::sync::Arc;

use app_planner_core::chat::ChatInput;
use app_planner_core::plan::SectionKind;
use app_planner_core::rubric::EvalMode;
use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode, Uri};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::error::ApiError;
use crate::service::Planner;

#[derive(Clone)]
pub struct AppState {
    pub planner: Arc<Planner>,
    pub api_token: Option<String>,
}

type ApiResult = Result<Response, ApiError>;

fn parse_body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn parse_optional_body<T: DeserializeOwned + Default>(bytes: &Bytes) -> Result<T, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        parse_body(bytes)
    }
}

fn parse_kind(raw: &str) -> Result<SectionKind, ApiError> {
    raw.parse::<SectionKind>()
        .map_err(|e| ApiError::new(400, "UnknownSection", e.to_string()))
}

fn ok(value: serde_json::Value) -> ApiResult {
    Ok(Json(value).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TitleBody {
    title: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextBody {
    text: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WireInput {
    Preset { preset_id: String },
    Text { text: String },
}

impl From<WireInput> for ChatInput {
    fn from(w: WireInput) -> Self {
        match w {
            WireInput::Preset { preset_id } => ChatInput::PresetClick { question_id: preset_id },
            WireInput::Text { text } => ChatInput::FreeText { text },
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChatBody {
    section: String,
    input: WireInput,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvaluateBody {
    section: Option<String>,
    mode: Option<EvalMode>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignBody {
    participant_ids: Vec<String>,
    task_ids: Vec<String>,
    #[serde(default)]
    projects: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct SectionQuery {
    section: Option<String>,
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn create_project(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let body: TitleBody = parse_body(&body)?;
    let project = s.planner.create_project(&body.title).await?;
    Ok((StatusCode::CREATED, Json(json!({ "project": project }))).into_response())
}

async fn list_projects(State(s): State<AppState>) -> ApiResult {
    ok(json!({ "projects": s.planner.list_projects()? }))
}

async fn get_project(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(serde_json::to_value(s.planner.get_project(&id)?).expect("view serializes"))
}

async fn rename_project(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let body: TitleBody = parse_body(&body)?;
    ok(json!({ "project": s.planner.rename(&id, &body.title).await? }))
}

async fn update_section(
    State(s): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let kind = parse_kind(&kind)?;
    let body: TextBody = parse_body(&body)?;
    ok(json!({ "project": s.planner.update_section(&id, kind, &body.text).await? }))
}

async fn presets(State(s): State<AppState>, Path(kind): Path<String>) -> ApiResult {
    ok(json!({ "presets": s.planner.presets(parse_kind(&kind)?)? }))
}

async fn chat(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let body: ChatBody = parse_body(&body)?;
    let kind = parse_kind(&body.section)?;
    let turn = s.planner.chat(&id, kind, body.input.into()).await?;
    ok(serde_json::to_value(turn).expect("turn serializes"))
}

async fn transcript(State(s): State<AppState>, Path(id): Path<String>, Query(q): Query<SectionQuery>) -> ApiResult {
    let section = q.section.as_deref().map(parse_kind).transpose()?;
    ok(json!({ "messages": s.planner.transcript(&id, section)? }))
}

async fn evaluate(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let body: EvaluateBody = parse_optional_body(&body)?;
    let section = body.section.as_deref().map(parse_kind).transpose()?;
    let results = s.planner.evaluate(&id, section, body.mode.unwrap_or_default()).await?;
    ok(json!({ "results": results }))
}

async fn brief(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(serde_json::to_value(s.planner.brief(&id)?).expect("brief serializes"))
}

async fn export(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(serde_json::to_value(s.planner.export(&id).await?).expect("brief serializes"))
}

async fn metrics(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(serde_json::to_value(s.planner.metrics(&id)?).expect("metrics serialize"))
}

async fn assign(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let body: AssignBody = parse_body(&body)?;
    let assignments = s
        .planner
        .assign(&body.participant_ids, &body.task_ids, &body.projects)
        .await?;
    ok(json!({ "assignments": assignments }))
}

async fn fallback(uri: Uri) -> ApiError {
    ApiError::route_not_found(uri.path())
}

async fn require_token(State(s): State<AppState>, request: Request, next: Next) -> Response {
    let Some(expected) = s.api_token.as_deref() else {
        return next.run(request).await;
    };
    if request.uri().path() == "/health" || request.method() == Method::OPTIONS {
        return next.run(request).await;
    }
    let presented = request
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(expected) {
        next.run(request).await
    } else {
        ApiError::unauthorized().into_response()
    }
}

pub fn router(state: AppState, ui_origin: Option<HeaderValue>) -> Router {
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project).patch(rename_project))
        .route("/projects/{id}/sections/{kind}", patch(update_section))
        .route("/projects/{id}/chat", post(chat))
        .route("/projects/{id}/transcript", get(transcript))
        .route("/projects/{id}/evaluate", post(evaluate))
        .route("/projects/{id}/brief", get(brief))
        .route("/projects/{id}/export", post(export))
        .route("/projects/{id}/metrics", get(metrics))
        .route("/sections/{kind}/presets", get(presets))
        .route("/study/assign", post(assign))
        .fallback(fallback)
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state);
    if let Some(origin) = ui_origin {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST, Method::PATCH])
                .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]),
        );
    }
    app
}
