//! HTTP error envelope. Every failure is `{"error": {code, message, detail}}`
//! where `code` is the variant name of the underlying error.

use app_planner_core::brief::BriefError;
use app_planner_core::chat::ChatError;
use app_planner_core::plan::PlanError;
use app_planner_core::rubric::RubricError;
use app_planner_core::scaffold::ScaffoldError;
use app_planner_core::store::StoreError;
use app_planner_core::study::StudyError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};

use crate::service::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(400, "InvalidRequest", message)
    }

    pub fn route_not_found(path: &str) -> Self {
        Self::new(404, "RouteNotFound", format!("no route for `{path}`"))
    }

    pub fn unauthorized() -> Self {
        Self::new(401, "Unauthorized", "missing or invalid bearer token")
    }

    pub fn body(&self) -> Value {
        json!({ "error": self })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(code = self.code, message = %self.message, "request failed");
        }
        (status, Json(self.body())).into_response()
    }
}

impl From<PlanError> for ApiError {
    fn from(e: PlanError) -> Self {
        let code = match e {
            PlanError::EmptyTitle => "EmptyTitle",
            PlanError::TitleTooLong { .. } => "TitleTooLong",
            PlanError::SectionTooLong { .. } => "SectionTooLong",
            PlanError::TitleNotEditableHere => "TitleNotEditableHere",
        };
        ApiError::new(400, code, e.to_string())
    }
}

impl From<ScaffoldError> for ApiError {
    fn from(e: ScaffoldError) -> Self {
        let (status, code) = match e {
            ScaffoldError::NoPresetsForTitle => (400, "NoPresetsForTitle"),
            ScaffoldError::UnknownPreset(_) => (400, "UnknownPreset"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<ChatError> for ApiError {
    fn from(e: ChatError) -> Self {
        let message = e.to_string();
        match e {
            ChatError::TitleHasNoChat => ApiError::new(400, "TitleHasNoChat", message),
            ChatError::UnknownPreset(_) => ApiError::new(400, "UnknownPreset", message),
            ChatError::PresetNotInSection { .. } => ApiError::new(400, "PresetNotInSection", message),
            ChatError::BlankInput => ApiError::new(400, "BlankInput", message),
            ChatError::InputTooLong { .. } => ApiError::new(400, "InputTooLong", message),
            ChatError::ModerationBlocked { reason, turn } => ApiError::new(422, "ModerationBlocked", message)
                .with_detail(json!({ "reason": reason.as_str(), "turn": turn })),
            ChatError::ProviderUnavailable { turn, .. } => {
                ApiError::new(502, "ProviderUnavailable", message).with_detail(json!({ "turn": turn }))
            }
        }
    }
}

impl From<RubricError> for ApiError {
    fn from(e: RubricError) -> Self {
        match e {
            RubricError::TitleHasNoRubric => ApiError::new(400, "TitleHasNoRubric", e.to_string()),
        }
    }
}

impl From<BriefError> for ApiError {
    fn from(e: BriefError) -> Self {
        let message = e.to_string();
        match e {
            BriefError::NotReady { failing } => {
                ApiError::new(409, "NotReady", message).with_detail(json!({ "failing": failing }))
            }
        }
    }
}

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        let code = match e {
            StudyError::NoParticipants => "NoParticipants",
            StudyError::TaskCountNot2(_) => "TaskCountNot2",
            StudyError::DuplicateParticipant(_) => "DuplicateParticipant",
            StudyError::DuplicateTask(_) => "DuplicateTask",
        };
        ApiError::new(400, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(_) => ApiError::new(404, "NotFound", message),
            StoreError::InvalidId(_) => ApiError::new(400, "InvalidId", message),
            StoreError::CorruptEnvelope { .. } => ApiError::new(500, "CorruptEnvelope", message),
            StoreError::InvalidEnvelope(_) => ApiError::new(500, "InvalidEnvelope", message),
            StoreError::StorageFull => ApiError::new(500, "StorageFull", message),
            StoreError::SerializationFailure(_) => ApiError::new(500, "SerializationFailure", message),
            StoreError::Io { .. } => ApiError::new(500, "Io", message),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Plan(e) => e.into(),
            ServiceError::Scaffold(e) => e.into(),
            ServiceError::Chat(e) => e.into(),
            ServiceError::Rubric(e) => e.into(),
            ServiceError::Brief(e) => e.into(),
            ServiceError::Study(e) => e.into(),
            ServiceError::Store(e) => e.into(),
            ServiceError::Validation(m) => ApiError::new(400, "Validation", m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use app_planner_core::chat::{ChatMessage, ChatTurn, MessageRole, Origin};
    use app_planner_core::chat::BlockReason;
    use app_planner_core::clock::Timestamp;
    use app_planner_core::plan::SectionKind;
    use proptest::prelude::*;

    fn turn() -> ChatTurn {
        let msg = |id: &str, role| ChatMessage {
            id: id.into(),
            project_id: "p".into(),
            section: SectionKind::Define,
            role,
            origin: Origin::System,
            text: "hi".into(),
            created_at: Timestamp(1),
        };
        ChatTurn {
            student_echo: msg("define-0001", MessageRole::Student),
            planner_reply: msg("define-0002", MessageRole::Planner),
        }
    }

    fn every_service_error() -> Vec<ServiceError> {
        let section = SectionKind::Define;
        vec![
            PlanError::EmptyTitle.into(),
            PlanError::TitleTooLong { len: 200 }.into(),
            PlanError::SectionTooLong { section, len: 9000 }.into(),
            PlanError::TitleNotEditableHere.into(),
            ScaffoldError::NoPresetsForTitle.into(),
            ScaffoldError::UnknownPreset("x".into()).into(),
            ChatError::TitleHasNoChat.into(),
            ChatError::UnknownPreset("x".into()).into(),
            ChatError::PresetNotInSection {
                id: "x".into(),
                section,
                belongs_to: SectionKind::Design,
            }
            .into(),
            ChatError::BlankInput.into(),
            ChatError::InputTooLong { len: 3000 }.into(),
            ChatError::ModerationBlocked {
                reason: BlockReason::Profanity,
                turn: Box::new(turn()),
            }
            .into(),
            ChatError::ProviderUnavailable {
                cause: "down".into(),
                turn: Box::new(turn()),
            }
            .into(),
            RubricError::TitleHasNoRubric.into(),
            BriefError::NotReady { failing: vec![section] }.into(),
            StudyError::NoParticipants.into(),
            StudyError::TaskCountNot2(3).into(),
            StudyError::DuplicateParticipant("a".into()).into(),
            StudyError::DuplicateTask("t".into()).into(),
            StoreError::NotFound("p".into()).into(),
            StoreError::InvalidId("..".into()).into(),
            StoreError::CorruptEnvelope {
                id: "p".into(),
                detail: "eof".into(),
            }
            .into(),
            StoreError::InvalidEnvelope("bad".into()).into(),
            StoreError::StorageFull.into(),
            StoreError::SerializationFailure("x".into()).into(),
            StoreError::Io {
                op: "write",
                source: std::io::Error::other("disk"),
            }
            .into(),
            ServiceError::Validation("bad".into()),
        ]
    }

    #[test]
    fn status_table() {
        let statuses: Vec<(&str, u16)> = every_service_error()
            .into_iter()
            .map(ApiError::from)
            .map(|e| (e.code, e.status))
            .collect();
        let expect = |code: &str| statuses.iter().find(|(c, _)| *c == code).unwrap().1;
        assert_eq!(expect("NotFound"), 404);
        assert_eq!(expect("NotReady"), 409);
        assert_eq!(expect("ModerationBlocked"), 422);
        assert_eq!(expect("ProviderUnavailable"), 502);
        assert_eq!(expect("InvalidId"), 400);
        assert_eq!(expect("CorruptEnvelope"), 500);
        assert_eq!(expect("Io"), 500);
    }

    #[test]
    fn details_carry_turn_and_failing() {
        let e: ApiError = ServiceError::from(BriefError::NotReady {
            failing: vec![SectionKind::Design],
        })
        .into();
        assert_eq!(e.body()["error"]["detail"]["failing"], json!(["design"]));
        let e: ApiError = ChatError::ProviderUnavailable {
            cause: "down".into(),
            turn: Box::new(turn()),
        }
        .into();
        assert_eq!(e.body()["error"]["detail"]["turn"]["planner_reply"]["id"], "define-0002");
        assert!(e.body()["error"].get("status").is_none());
    }

    proptest! {
        #[test]
        fn every_error_maps_to_a_client_or_server_status(i in 0usize..27) {
            let errors = every_service_error();
            let e = ApiError::from(errors.into_iter().nth(i % 27).unwrap());
            prop_assert!((400..600).contains(&e.status));
            prop_assert!(!e.code.is_empty() && !e.message.is_empty());
            let body = e.body();
            prop_assert_eq!(body["error"]["code"].as_str(), Some(e.code));
            prop_assert!(body["error"]["message"].is_string());
        }
    }
}
