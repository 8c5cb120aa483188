//! Hybrid chat: preset clicks are answered from the catalog, free text goes
//! to the model provider with the plan as context.

mod moderation;
mod prompt;
mod reply;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::catalog::Catalog;
use crate::clock::{Clock, Timestamp};
use crate::llm::{ChatProvider, FinishReason, ProviderError, DEFAULT_MAX_TOKENS, DEFAULT_MODEL, DEFAULT_TEMPERATURE};
use crate::plan::{Project, SectionKind};
use crate::text::{char_len, is_blank};

pub use moderation::{moderate_input, BlockReason, Moderation};
pub use prompt::{
    assemble_prompt, context_text, system_text, PromptBundle, PromptLimits, DEFAULT_HISTORY_WINDOW,
    DEFAULT_TOKEN_BUDGET,
};
pub use reply::{cap_at_sentence, is_encouraging, postprocess_reply, ReplyError, ENCOURAGEMENT_LINES, MAX_REPLY_CHARS};

pub const MAX_INPUT_CHARS: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChatInput {
    PresetClick { question_id: String },
    FreeText { text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    Student,
    Planner,
}

/// Which path produced a message. Student messages carry the route their
/// turn took (`rule` for a preset click, `model` for typed text); `system`
/// is reserved for planner replies written by the orchestrator itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Rule,
    Model,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub id: String,
    pub project_id: String,
    pub section: SectionKind,
    pub role: MessageRole,
    pub origin: Origin,
    pub text: String,
    pub created_at: Timestamp,
}

/// Per-section message threads. Messages can only be appended.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    threads: BTreeMap<SectionKind, Vec<ChatMessage>>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn thread(&self, kind: SectionKind) -> &[ChatMessage] {
        self.threads.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn threads(&self) -> impl Iterator<Item = (SectionKind, &[ChatMessage])> {
        self.threads.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.threads.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push(&mut self, message: ChatMessage) {
        self.threads.entry(message.section).or_default().push(message);
    }

    fn next_id(&self, kind: SectionKind) -> String {
        format!("{kind}-{:04}", self.thread(kind).len() + 1)
    }

    fn last_time(&self, kind: SectionKind) -> Option<Timestamp> {
        self.thread(kind).last().map(|m| m.created_at)
    }

    pub fn check_invariants(&self, project_id: &str) -> Result<(), String> {
        let mut ids = std::collections::HashSet::new();
        for (kind, thread) in &self.threads {
            if !kind.has_chat() {
                return Err(format!("transcript has a `{kind}` thread"));
            }
            let mut last = None;
            for m in thread {
                if m.section != *kind {
                    return Err(format!("message {} filed under {kind}", m.id));
                }
                if m.project_id != project_id {
                    return Err(format!("message {} belongs to {}", m.id, m.project_id));
                }
                if m.role == MessageRole::Student && m.origin == Origin::System {
                    return Err(format!("student message {} has system origin", m.id));
                }
                if !ids.insert(m.id.as_str()) {
                    return Err(format!("duplicate message id {}", m.id));
                }
                if last.is_some_and(|t| m.created_at < t) {
                    return Err(format!("message {} is older than its predecessor", m.id));
                }
                last = Some(m.created_at);
            }
        }
        Ok(())
    }
}

/// The two messages a turn appends, student first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub student_echo: ChatMessage,
    pub planner_reply: ChatMessage,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChatError {
    #[error("the title box has no chat")]
    TitleHasNoChat,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{id}` belongs to {belongs_to}, not {section}")]
    PresetNotInSection {
        id: String,
        section: SectionKind,
        belongs_to: SectionKind,
    },
    #[error("message is blank")]
    BlankInput,
    #[error("message is {len} characters; the limit is {MAX_INPUT_CHARS}")]
    InputTooLong { len: usize },
    #[error("message blocked ({})", reason.as_str())]
    ModerationBlocked { reason: BlockReason, turn: Box<ChatTurn> },
    #[error("the assistant is unavailable: {cause}")]
    ProviderUnavailable { cause: String, turn: Box<ChatTurn> },
}

impl ChatError {
    /// Messages appended to the transcript before the error was returned.
    pub fn appended(&self) -> Option<&ChatTurn> {
        match self {
            ChatError::ModerationBlocked { turn, .. } | ChatError::ProviderUnavailable { turn, .. } => {
                Some(turn)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatSettings {
    pub limits: PromptLimits,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatSettings {
    fn default() -> Self {
        Self {
            limits: PromptLimits::default(),
            model: DEFAULT_MODEL.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

pub struct ChatOrchestrator {
    catalog: Arc<Catalog>,
    provider: Arc<dyn ChatProvider>,
    clock: Arc<dyn Clock>,
    settings: ChatSettings,
}

impl ChatOrchestrator {
    pub fn new(
        catalog: Arc<Catalog>,
        provider: Arc<dyn ChatProvider>,
        clock: Arc<dyn Clock>,
        settings: ChatSettings,
    ) -> Self {
        Self {
            catalog,
            provider,
            clock,
            settings,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn settings(&self) -> &ChatSettings {
        &self.settings
    }

    /// Runs one turn. On success both messages are in `transcript`. Moderation
    /// and provider failures also append a student message and a system
    /// reply, returned inside the error; every other error appends nothing.
    pub async fn handle_message(
        &self,
        project: &Project,
        transcript: &mut Transcript,
        kind: SectionKind,
        input: ChatInput,
    ) -> Result<ChatTurn, ChatError> {
        if !kind.has_chat() {
            return Err(ChatError::TitleHasNoChat);
        }
        match input {
            ChatInput::PresetClick { question_id } => {
                let preset = self
                    .catalog
                    .preset(&question_id)
                    .ok_or_else(|| ChatError::UnknownPreset(question_id.clone()))?;
                if preset.section != kind {
                    return Err(ChatError::PresetNotInSection {
                        id: question_id,
                        section: kind,
                        belongs_to: preset.section,
                    });
                }
                let reply = self
                    .catalog
                    .rule_response(&question_id, project)
                    .map_err(|_| ChatError::UnknownPreset(question_id.clone()))?;
                let label = preset.label.clone();
                Ok(self.append_turn(project, transcript, kind, Origin::Rule, label, Origin::Rule, reply))
            }
            ChatInput::FreeText { text } => self.free_text(project, transcript, kind, text).await,
        }
    }

    async fn free_text(
        &self,
        project: &Project,
        transcript: &mut Transcript,
        kind: SectionKind,
        text: String,
    ) -> Result<ChatTurn, ChatError> {
        let len = char_len(&text);
        if len > MAX_INPUT_CHARS {
            return Err(ChatError::InputTooLong { len });
        }
        if let Moderation::Blocked { reason } = moderate_input(&text) {
            debug!(section = %kind, reason = reason.as_str(), "input blocked");
            let turn = self.append_turn(
                project,
                transcript,
                kind,
                Origin::Model,
                text.trim().to_string(),
                Origin::System,
                reason.redirect_text().to_string(),
            );
            return Err(ChatError::ModerationBlocked {
                reason,
                turn: Box::new(turn),
            });
        }
        if is_blank(&text) {
            return Err(ChatError::BlankInput);
        }

        let query = text.trim().to_string();
        let bundle = assemble_prompt(
            &self.catalog,
            project,
            kind,
            transcript.thread(kind),
            &query,
            self.settings.limits,
        );
        let request = bundle.to_request(&self.settings.model, self.settings.temperature, self.settings.max_tokens);
        let rotation = transcript
            .thread(kind)
            .iter()
            .filter(|m| m.role == MessageRole::Planner && m.origin == Origin::Model)
            .count();

        let outcome = match self.provider.complete(&request).await {
            Ok(reply) if reply.finish_reason == FinishReason::Filtered => Err("reply was filtered".to_string()),
            Ok(reply) => postprocess_reply(&reply.content, rotation).map_err(|e| e.to_string()),
            Err(e) => Err(provider_cause(&e)),
        };
        match outcome {
            Ok(reply) => Ok(self.append_turn(project, transcript, kind, Origin::Model, query, Origin::Model, reply)),
            Err(cause) => {
                warn!(section = %kind, %cause, "provider unavailable");
                let fallback = self.fallback_text(kind);
                let turn = self.append_turn(project, transcript, kind, Origin::Model, query, Origin::System, fallback);
                Err(ChatError::ProviderUnavailable {
                    cause,
                    turn: Box::new(turn),
                })
            }
        }
    }

    fn fallback_text(&self, kind: SectionKind) -> String {
        let labels: Vec<String> = self
            .catalog
            .presets()
            .iter()
            .filter(|p| p.section == kind)
            .map(|p| format!("\"{}\"", p.label))
            .collect();
        format!(
            "I can't reach the assistant right now. While you wait, try one of the question bubbles: {}.",
            labels.join(", ")
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn append_turn(
        &self,
        project: &Project,
        transcript: &mut Transcript,
        kind: SectionKind,
        student_origin: Origin,
        student_text: String,
        reply_origin: Origin,
        reply_text: String,
    ) -> ChatTurn {
        let student_echo = self.message(project, transcript, kind, MessageRole::Student, student_origin, student_text);
        transcript.push(student_echo.clone());
        let planner_reply = self.message(project, transcript, kind, MessageRole::Planner, reply_origin, reply_text);
        transcript.push(planner_reply.clone());
        ChatTurn {
            student_echo,
            planner_reply,
        }
    }

    fn message(
        &self,
        project: &Project,
        transcript: &Transcript,
        kind: SectionKind,
        role: MessageRole,
        origin: Origin,
        text: String,
    ) -> ChatMessage {
        let now = self.clock.now();
        let created_at = transcript.last_time(kind).map_or(now, |last| now.max(last));
        ChatMessage {
            id: transcript.next_id(kind),
            project_id: project.id().to_string(),
            section: kind,
            role,
            origin,
            text,
            created_at,
        }
    }
}

/// Provider errors as shown to callers. Never includes request headers.
fn provider_cause(e: &ProviderError) -> String {
    e.to_string()
}
