//! Chat-completions body encoding and reply decoding.

use serde::Serialize;
use serde_json::Value;

use super::{FinishReason, Message, ModelReply, ModelRequest, ProviderError};

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

impl<'a> From<&'a Message> for WireMessage<'a> {
    fn from(m: &'a Message) -> Self {
        Self {
            role: m.role.as_str(),
            content: &m.content,
        }
    }
}

/// Compact JSON body with keys in the order `model`, `messages`,
/// `temperature`, `max_tokens`. Only `"`, `\` and control characters are
/// escaped; everything else is written as UTF-8.
pub fn encode_request(request: &ModelRequest) -> Vec<u8> {
    let wire = WireRequest {
        model: &request.model,
        messages: request.messages.iter().map(WireMessage::from).collect(),
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    };
    serde_json::to_vec(&wire).expect("request body always serializes")
}

/// Reads the first choice and the usage counters, ignoring everything else.
pub fn decode_reply(body: &[u8]) -> Result<ModelReply, ProviderError> {
    let root: Value = serde_json::from_slice(body).map_err(|_| malformed("$"))?;
    let choices = root
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("choices"))?;
    let choice = choices.first().ok_or_else(|| malformed("choices[0]"))?;
    let message = choice
        .get("message")
        .filter(|v| v.is_object())
        .ok_or_else(|| malformed("choices[0].message"))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("choices[0].message.content"))?;
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("stop") => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        Some("content_filter") | Some("filtered") => FinishReason::Filtered,
        _ => return Err(malformed("choices[0].finish_reason")),
    };
    let usage = root
        .get("usage")
        .filter(|v| v.is_object())
        .ok_or_else(|| malformed("usage"))?;
    let prompt_tokens = usage
        .get("prompt_tokens")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("usage.prompt_tokens"))?;
    let completion_tokens = usage
        .get("completion_tokens")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("usage.completion_tokens"))?;

    if finish_reason == FinishReason::Stop && content.trim().is_empty() {
        return Err(malformed("choices[0].message.content"));
    }
    Ok(ModelReply {
        content: content.to_string(),
        finish_reason,
        prompt_tokens,
        completion_tokens,
    })
}

fn malformed(path: &str) -> ProviderError {
    ProviderError::MalformedReply {
        path: path.to_string(),
    }
}
