//! Provider-agnostic chat-completion client.
//!
//! One wire codec ships built in: the widely used `/v1/chat/completions`
//! JSON shape. [`HttpProvider`] speaks it over the network with bounded
//! retries; [`MockProvider`] answers offline from a hashed bank of canned
//! scaffolding replies and counts how often it was called.

mod codec;
mod http;
mod mock;

use std::fmt;
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{decode_reply, encode_request};
pub use http::HttpProvider;
pub use mock::{mock_complete, MockProvider, MOCK_REPLY_BANK};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const DEFAULT_TIMEOUT_MS: u64 = 20_000;
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_BACKOFF_BASE_MS: u64 = 500;
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";
pub const CHARS_PER_TOKEN: usize = 4;

/// Rough token count used for prompt budgeting.
pub fn approx_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(CHARS_PER_TOKEN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ModelRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            model: model.into(),
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Checks the request shape: a leading system message, then user and
    /// assistant turns that never repeat a role back to back.
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::InvalidRequest(m.to_string()));
        if self.model.trim().is_empty() {
            return bad("model must not be empty");
        }
        let Some(first) = self.messages.first() else {
            return bad("messages must not be empty");
        };
        if first.role != Role::System {
            return bad("first message must have role system");
        }
        let mut prev = Role::System;
        for (i, m) in self.messages.iter().enumerate().skip(1) {
            if m.role == Role::System {
                return bad(&format!("messages[{i}]: only the first message may be system"));
            }
            if m.role == prev {
                return bad(&format!("messages[{i}]: consecutive {} turns", m.role.as_str()));
            }
            prev = m.role;
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must be within 0.0..=2.0");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        Ok(())
    }

    pub fn last_user_text(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelReply {
    pub content: String,
    pub finish_reason: FinishReason,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("provider rejected the request with status {status}")]
    Rejected { status: u16 },
    #[error("provider kept failing with status {status} after {attempts} attempt(s)")]
    ServerError { status: u16, attempts: u32 },
    #[error("could not reach provider after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("malformed reply: missing or invalid `{path}`")]
    MalformedReply { path: String },
    #[error("provider configuration: {0}")]
    Config(String),
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelReply, ProviderError>;
}

#[async_trait]
impl<P: ChatProvider + ?Sized> ChatProvider for Arc<P> {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelReply, ProviderError> {
        (**self).complete(request).await
    }
}

/// An API key. Never printed, never serialized.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.trim().is_empty()
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0.is_empty() { "ApiKey(<empty>)" } else { "ApiKey(<redacted>)" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Live,
    Mock,
}

impl std::str::FromStr for ProviderMode {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(ProviderMode::Live),
            "mock" => Ok(ProviderMode::Mock),
            other => Err(ProviderError::Config(format!("unknown llm mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub base_url: String,
    pub api_key: ApiKey,
    pub model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub mode: ProviderMode,
    pub mock_seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: ApiKey::default(),
            model: DEFAULT_MODEL.to_string(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_retries: DEFAULT_MAX_RETRIES,
            backoff_base_ms: DEFAULT_BACKOFF_BASE_MS,
            mode: ProviderMode::Mock,
            mock_seed: 0,
        }
    }
}

impl ProviderConfig {
    /// Reads `APP_PLANNER_LLM_URL`, `APP_PLANNER_LLM_KEY`,
    /// `APP_PLANNER_LLM_MODEL`, `APP_PLANNER_LLM_TIMEOUT_MS`,
    /// `APP_PLANNER_LLM_MODE` and `APP_PLANNER_LLM_SEED` from the process
    /// environment.
    pub fn from_env() -> Result<Self, ProviderError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ProviderError> {
        let mut cfg = ProviderConfig::default();
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        if let Some(url) = get("APP_PLANNER_LLM_URL") {
            cfg.base_url = url.trim().to_string();
        }
        if let Some(key) = get("APP_PLANNER_LLM_KEY") {
            cfg.api_key = ApiKey::new(key.trim());
        }
        if let Some(model) = get("APP_PLANNER_LLM_MODEL") {
            cfg.model = model.trim().to_string();
        }
        if let Some(ms) = get("APP_PLANNER_LLM_TIMEOUT_MS") {
            cfg.timeout_ms = ms.trim().parse().map_err(|_| {
                ProviderError::Config(format!("APP_PLANNER_LLM_TIMEOUT_MS is not a number: `{ms}`"))
            })?;
        }
        if let Some(mode) = get("APP_PLANNER_LLM_MODE") {
            cfg.mode = mode.parse()?;
        }
        if let Some(seed) = get("APP_PLANNER_LLM_SEED") {
            cfg.mock_seed = seed.trim().parse().map_err(|_| {
                ProviderError::Config(format!("APP_PLANNER_LLM_SEED is not a number: `{seed}`"))
            })?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.mode == ProviderMode::Live {
            if self.api_key.is_empty() {
                return Err(ProviderError::Config("live mode requires an API key".into()));
            }
            if self.base_url.trim().is_empty() {
                return Err(ProviderError::Config("live mode requires a base URL".into()));
            }
        }
        if self.timeout_ms == 0 {
            return Err(ProviderError::Config("timeout_ms must be positive".into()));
        }
        Ok(())
    }

    /// The chat-completions endpoint derived from `base_url`.
    pub fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}

/// Builds the provider selected by `config.mode`.
pub fn provider_from_config(config: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, ProviderError> {
    config.validate()?;
    Ok(match config.mode {
        ProviderMode::Mock => Arc::new(MockProvider::new(config.mock_seed)),
        ProviderMode::Live => Arc::new(HttpProvider::new(config.clone())?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msgs(roles: &[Role]) -> Vec<Message> {
        roles.iter().map(|r| Message::new(*r, "x")).collect()
    }

    #[test]
    fn request_shape_rules() {
        use Role::*;
        assert!(ModelRequest::new("m", msgs(&[System, User])).validate().is_ok());
        assert!(ModelRequest::new("m", msgs(&[System, Assistant, User])).validate().is_ok());
        assert!(ModelRequest::new("m", msgs(&[System, User, Assistant, User])).validate().is_ok());
        assert!(ModelRequest::new("m", vec![]).validate().is_err());
        assert!(ModelRequest::new("m", msgs(&[User])).validate().is_err());
        assert!(ModelRequest::new("m", msgs(&[System, User, User])).validate().is_err());
        assert!(ModelRequest::new("m", msgs(&[System, System])).validate().is_err());
        let mut hot = ModelRequest::new("m", msgs(&[System, User]));
        hot.temperature = 2.5;
        assert!(hot.validate().is_err());
        hot.temperature = 2.0;
        hot.max_tokens = 0;
        assert!(hot.validate().is_err());
    }

    #[test]
    fn api_key_is_redacted() {
        let key = ApiKey::new("sk-very-secret");
        assert_eq!(format!("{key:?}"), "ApiKey(<redacted>)");
        let cfg = ProviderConfig {
            api_key: key,
            ..Default::default()
        };
        assert!(!format!("{cfg:?}").contains("sk-very-secret"));
    }

    #[test]
    fn config_from_lookup() {
        let env = |k: &str| match k {
            "APP_PLANNER_LLM_URL" => Some("http://127.0.0.1:9/".to_string()),
            "APP_PLANNER_LLM_KEY" => Some("k".to_string()),
            "APP_PLANNER_LLM_MODEL" => Some("tiny".to_string()),
            "APP_PLANNER_LLM_TIMEOUT_MS" => Some("1500".to_string()),
            "APP_PLANNER_LLM_MODE" => Some("LIVE".to_string()),
            _ => None,
        };
        let cfg = ProviderConfig::from_lookup(env).unwrap();
        assert_eq!(cfg.mode, ProviderMode::Live);
        assert_eq!(cfg.timeout_ms, 1500);
        assert_eq!(cfg.model, "tiny");
        assert_eq!(cfg.endpoint(), "http://127.0.0.1:9/v1/chat/completions");
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn live_mode_needs_a_key() {
        let cfg = ProviderConfig {
            mode: ProviderMode::Live,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(ProviderError::Config(_))));
        assert!(provider_from_config(&cfg).is_err());
    }

    #[test]
    fn endpoint_variants() {
        let mut cfg = ProviderConfig {
            base_url: "https://host/v1".into(),
            ..Default::default()
        };
        assert_eq!(cfg.endpoint(), "https://host/v1/chat/completions");
        cfg.base_url = "https://host/custom/chat/completions".into();
        assert_eq!(cfg.endpoint(), "https://host/custom/chat/completions");
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(approx_tokens(""), 0);
        assert_eq!(approx_tokens("abcd"), 1);
        assert_eq!(approx_tokens("abcde"), 2);
    }
}
