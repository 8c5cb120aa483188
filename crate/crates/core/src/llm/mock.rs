//! Deterministic offline stand-in for a hosted model.

use std::sync::atomic::{AtomicU64, Ordering};

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use super::{approx_tokens, ChatProvider, FinishReason, ModelReply, ModelRequest, ProviderError};

const ECHO_WORDS: usize = 6;

/// Canned scaffolding replies. `{echo}` is replaced with the first words of
/// the student's latest message.
pub const MOCK_REPLY_BANK: [&str; 12] = [
    "You asked about \"{echo}\". Start with the person who has this problem: what are they trying to do when it happens? Write one sentence about that moment.",
    "Great question about \"{echo}\". One idea is a simple list that people can check quickly. What would the first item on that list be for your users?",
    "Thinking about \"{echo}\": try describing a day in the life of your user. Where do they get stuck, and what could your app show them at that moment?",
    "Let's unpack \"{echo}\". A good feature does one job well. Which one job matters most, and what button or screen would a user touch to do it?",
    "Nice thinking on \"{echo}\". For example, a reminder notification could help, but it could also be distracting. When would a reminder be helpful and when would it be annoying?",
    "About \"{echo}\": imagine three different people using your app, like a student, a parent, and a teacher. How would each of them use it differently?",
    "Here is one way to look at \"{echo}\". Apps can collect information without people noticing. What data would your app need, and is there any data it could do without?",
    "Interesting point about \"{echo}\". Try sketching the first screen in words: what is at the top, what is in the middle, and what can the user tap?",
    "On \"{echo}\": think about what success looks like. If your app works perfectly, what would your user be able to do next week that they can't do today?",
    "Good start with \"{echo}\". Some users might not read English well or might not have a new phone. How could your design include them too?",
    "Regarding \"{echo}\": a text box lets people type, a button starts an action, and a list shows many items. Which of these does your idea need, and why?",
    "For \"{echo}\", consider both sides. Who benefits the most from your app, and who might be left out or affected in a way you did not plan?",
];

/// Picks a bank entry by hashing the seed and every message, then echoes the
/// first six words of the latest user message.
pub fn mock_complete(request: &ModelRequest, seed: u64) -> ModelReply {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for m in &request.messages {
        hasher.update(m.role.as_str().as_bytes());
        hasher.update([0x1f]);
        hasher.update(m.content.as_bytes());
        hasher.update([0x1e]);
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    let index = (u64::from_be_bytes(head) % MOCK_REPLY_BANK.len() as u64) as usize;

    let echo = request
        .last_user_text()
        .map(|t| t.split_whitespace().take(ECHO_WORDS).collect::<Vec<_>>().join(" "))
        .filter(|e| !e.is_empty())
        .unwrap_or_else(|| "your idea".to_string());
    let content = MOCK_REPLY_BANK[index].replace("{echo}", &echo);

    let prompt_chars: String = request.messages.iter().map(|m| m.content.as_str()).collect();
    ModelReply {
        completion_tokens: approx_tokens(&content) as u64,
        prompt_tokens: approx_tokens(&prompt_chars) as u64,
        content,
        finish_reason: FinishReason::Stop,
    }
}

/// [`mock_complete`] behind the provider trait, counting every call.
#[derive(Debug, Default)]
pub struct MockProvider {
    seed: u64,
    calls: AtomicU64,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl ChatProvider for MockProvider {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelReply, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        request.validate()?;
        Ok(mock_complete(request, self.seed))
    }
}
