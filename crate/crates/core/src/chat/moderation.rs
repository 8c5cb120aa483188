//! Local input screen for a K-12 audience. Pattern based, no network.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockReason {
    SelfHarm,
    Violence,
    Profanity,
    PersonalInfo,
}

impl BlockReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockReason::SelfHarm => "self_harm",
            BlockReason::Violence => "violence",
            BlockReason::Profanity => "profanity",
            BlockReason::PersonalInfo => "personal_info",
        }
    }

    /// What the planner says instead of answering.
    pub fn redirect_text(self) -> &'static str {
        match self {
            BlockReason::SelfHarm => {
                "It sounds like something heavy might be going on. Please talk to a teacher, \
                 a school counselor, or another adult you trust right away. \
                 I'm here to help with your app plan whenever you're ready."
            }
            BlockReason::Violence => {
                "I can't help with that. Let's get back to your app plan: \
                 try one of the question bubbles above, or ask me about your idea."
            }
            BlockReason::Profanity => {
                "Let's keep our chat friendly. Could you ask that again in different words? \
                 You can also tap one of the question bubbles above."
            }
            BlockReason::PersonalInfo => {
                "Please don't share personal details like phone numbers or email addresses here. \
                 Ask your question again without them and I'll help."
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Moderation {
    Allowed,
    Blocked { reason: BlockReason },
}

static SCREENS: LazyLock<Vec<(BlockReason, Regex)>> = LazyLock::new(|| {
    let rules: [(BlockReason, &str); 5] = [
        (
            BlockReason::SelfHarm,
            r"(?i)\b(?:kill(?:ing)?\s+myself|hurt(?:ing)?\s+myself|cut(?:ting)?\s+myself|suicid\w*|self[-\s]?harm\w*|want\s+to\s+die|end\s+my\s+life)\b",
        ),
        (
            BlockReason::Violence,
            r"(?i)\b(?:(?:make|build|making|building)\s+(?:a\s+)?bombs?|shoot\s+up|kill\s+(?:someone|somebody|people|him|her|them)|murder\w*|stab\s+(?:someone|somebody|people|him|her|them)|buy\s+(?:a\s+)?guns?)\b",
        ),
        (
            BlockReason::Profanity,
            r"(?i)\b(?:fuck\w*|motherfuck\w*|shit\w*|bullshit|bitch\w*|asshole\w*|bastard\w*|dick|dicks|cunt\w*|slut\w*|whore\w*|piss(?:ed)?)\b",
        ),
        (
            BlockReason::PersonalInfo,
            r"(?i)\b[\w.+-]+@[a-z0-9-]+(?:\.[a-z0-9-]+)+\b",
        ),
        (
            BlockReason::PersonalInfo,
            r"(?:\+?\d{1,2}[\s.-]?)?(?:\(\d{3}\)|\b\d{3})[\s.-]?\d{3}[\s.-]?\d{4}\b",
        ),
    ];
    rules
        .into_iter()
        .map(|(reason, pattern)| (reason, Regex::new(pattern).expect("moderation pattern")))
        .collect()
});

/// Screens free text before it reaches the model. Empty input is allowed
/// here; blank messages are rejected later by the chat orchestrator.
pub fn moderate_input(text: &str) -> Moderation {
    SCREENS
        .iter()
        .find(|(_, re)| re.is_match(text))
        .map(|(reason, _)| Moderation::Blocked { reason: *reason })
        .unwrap_or(Moderation::Allowed)
}
