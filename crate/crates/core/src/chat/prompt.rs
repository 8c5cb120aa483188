//! Prompt assembly for free-text turns.

use serde::{Deserialize, Serialize};

use super::{ChatMessage, MessageRole, Origin};
use crate::catalog::Catalog;
use crate::llm::{approx_tokens, Message, ModelRequest, Role, CHARS_PER_TOKEN};
use crate::plan::{Project, SectionKind};
use crate::text::{char_len, is_blank, prefix_chars};

pub const DEFAULT_HISTORY_WINDOW: usize = 8;
pub const DEFAULT_TOKEN_BUDGET: usize = 3_000;

/// Everything sent to the model for one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub context_text: String,
    pub history: Vec<ChatMessage>,
    pub query: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptLimits {
    /// Most recent thread messages kept as history.
    pub history_window: usize,
    /// Budget for the whole bundle, in approximate tokens.
    pub token_budget: usize,
}

impl Default for PromptLimits {
    fn default() -> Self {
        Self {
            history_window: DEFAULT_HISTORY_WINDOW,
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

impl PromptBundle {
    pub fn rendered_chars(&self) -> usize {
        char_len(&self.system_text)
            + char_len(&self.context_text)
            + self.history.iter().map(|m| char_len(&m.text)).sum::<usize>()
            + char_len(&self.query)
    }

    pub fn approx_tokens(&self) -> usize {
        approx_tokens(&self.system_text)
            + approx_tokens(&self.context_text)
            + self.history.iter().map(|m| approx_tokens(&m.text)).sum::<usize>()
            + approx_tokens(&self.query)
    }

    /// System text and plan context go in the system message, history maps
    /// student turns to `user` and planner turns to `assistant`, and the query
    /// is the final user message.
    pub fn to_request(&self, model: &str, temperature: f64, max_tokens: u32) -> ModelRequest {
        let mut messages = vec![Message::new(
            Role::System,
            format!("{}\n\n{}", self.system_text, self.context_text),
        )];
        let mut history: Vec<Message> = self
            .history
            .iter()
            .map(|m| {
                let role = match m.role {
                    MessageRole::Student => Role::User,
                    MessageRole::Planner => Role::Assistant,
                };
                Message::new(role, m.text.clone())
            })
            .collect();
        while history.last().is_some_and(|m| m.role == Role::User) {
            history.pop();
        }
        messages.extend(history);
        messages.push(Message::new(Role::User, self.query.clone()));
        ModelRequest {
            model: model.to_string(),
            messages,
            temperature,
            max_tokens,
        }
    }
}

pub fn system_text(catalog: &Catalog, kind: SectionKind) -> String {
    let goal = catalog
        .guidance_card(kind)
        .map(|c| c.prompt_text.as_str())
        .unwrap_or("Help the student think through their app idea.");
    format!(
        "You are App Planner, a friendly coach helping a K-12 student plan a mobile app before they build it. \
         The student is working on the {stage} stage. Goal of the {stage} stage: {goal} \
         Help by asking one or two guiding questions and giving short, concrete examples. \
         Do not write the student's plan for them; build on their own ideas and point out what they did well. \
         Keep replies under 150 words and use language a middle or high school student understands.",
        stage = kind.label(),
    )
}

pub fn context_text(project: &Project) -> String {
    let mut lines = vec![format!("Project title: {}", project.title())];
    for kind in SectionKind::CHAT {
        let text = project.text(kind).trim();
        if !is_blank(text) {
            lines.push(format!("{}: {}", kind.label(), text));
        }
    }
    lines.join("\n")
}

/// Thread messages usable as history: same section only, with moderation
/// and outage exchanges (a student turn answered by a system reply) left
/// out.
fn usable_history(history: &[ChatMessage], kind: SectionKind) -> Vec<ChatMessage> {
    let thread: Vec<&ChatMessage> = history.iter().filter(|m| m.section == kind).collect();
    let mut out = Vec::with_capacity(thread.len());
    let mut i = 0;
    while i < thread.len() {
        let m = thread[i];
        let next = thread.get(i + 1);
        match (m.role, next) {
            (MessageRole::Student, Some(reply))
                if reply.role == MessageRole::Planner && reply.origin == Origin::System =>
            {
                i += 2;
            }
            (MessageRole::Planner, _) if m.origin == Origin::System => i += 1,
            _ => {
                out.push(m.clone());
                i += 1;
            }
        }
    }
    out
}

pub fn assemble_prompt(
    catalog: &Catalog,
    project: &Project,
    kind: SectionKind,
    history: &[ChatMessage],
    query: &str,
    limits: PromptLimits,
) -> PromptBundle {
    let mut kept = usable_history(history, kind);
    if kept.len() > limits.history_window {
        kept.drain(..kept.len() - limits.history_window);
    }
    let mut bundle = PromptBundle {
        system_text: system_text(catalog, kind),
        context_text: context_text(project),
        history: kept,
        query: query.trim().to_string(),
    };

    let budget = limits.token_budget.saturating_mul(CHARS_PER_TOKEN);
    while bundle.rendered_chars() > budget && !bundle.history.is_empty() {
        bundle.history.remove(0);
    }
    if bundle.rendered_chars() > budget {
        let fixed = char_len(&bundle.system_text) + char_len(&bundle.query);
        let room = budget.saturating_sub(fixed);
        bundle.context_text = elide(&bundle.context_text, room);
    }
    if bundle.rendered_chars() > budget {
        let room = budget.saturating_sub(char_len(&bundle.system_text) + char_len(&bundle.context_text));
        bundle.query = elide(&bundle.query, room);
    }
    bundle
}

fn elide(text: &str, room: usize) -> String {
    if char_len(text) <= room {
        return text.to_string();
    }
    if room == 0 {
        return String::new();
    }
    format!("{}…", prefix_chars(text, room - 1))
}
