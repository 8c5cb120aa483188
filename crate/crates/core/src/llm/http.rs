use std::time::Duration;

use async_trait::async_trait;
use tracing::{debug, warn};

use super::{
    decode_reply, encode_request, ChatProvider, ModelReply, ModelRequest, ProviderConfig,
    ProviderError,
};

/// Talks to a chat-completions endpoint. Each attempt is bounded by
/// `timeout_ms`; timeouts, connection failures, 429 and 5xx are retried up to
/// `max_retries` times with exponential backoff. Other statuses fail at once.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    config: ProviderConfig,
    endpoint: String,
    client: reqwest::Client,
}

enum Attempt {
    Done(Result<ModelReply, ProviderError>),
    Retry(ProviderError),
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::Client::builder()
            .build()
            .map_err(|e| ProviderError::Config(format!("http client: {e}")))?;
        Ok(Self {
            endpoint: config.endpoint(),
            config,
            client,
        })
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64 << (retry.saturating_sub(1)).min(16);
        Duration::from_millis(self.config.backoff_base_ms.saturating_mul(factor))
    }

    async fn attempt(&self, body: Vec<u8>, attempts: u32) -> Attempt {
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let call = async {
            let resp = self
                .client
                .post(&self.endpoint)
                .bearer_auth(self.config.api_key.expose())
                .header(reqwest::header::CONTENT_TYPE, "application/json")
                .body(body)
                .send()
                .await?;
            let status = resp.status().as_u16();
            let bytes = resp.bytes().await?;
            Ok::<_, reqwest::Error>((status, bytes))
        };
        match tokio::time::timeout(timeout, call).await {
            Err(_) => Attempt::Retry(ProviderError::Timeout { attempts }),
            Ok(Err(e)) if e.is_timeout() => Attempt::Retry(ProviderError::Timeout { attempts }),
            Ok(Err(e)) => Attempt::Retry(ProviderError::Transport {
                // reqwest errors carry the URL but never request headers.
                message: e.without_url().to_string(),
                attempts,
            }),
            Ok(Ok((status, bytes))) => match status {
                200..=299 => Attempt::Done(decode_reply(&bytes)),
                429 | 500..=599 => Attempt::Retry(ProviderError::ServerError { status, attempts }),
                _ => Attempt::Done(Err(ProviderError::Rejected { status })),
            },
        }
    }
}

#[async_trait]
impl ChatProvider for HttpProvider {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelReply, ProviderError> {
        request.validate()?;
        let body = encode_request(request);
        let max_attempts = 1 + self.config.max_retries;
        let mut last = None;
        for attempt in 1..=max_attempts {
            if attempt > 1 {
                tokio::time::sleep(self.backoff(attempt - 1)).await;
            }
            match self.attempt(body.clone(), attempt).await {
                Attempt::Done(result) => {
                    debug!(attempt, ok = result.is_ok(), "provider call finished");
                    return result;
                }
                Attempt::Retry(err) => {
                    warn!(attempt, max_attempts, error = %err, "provider call failed");
                    last = Some(err);
                }
            }
        }
        Err(last.expect("at least one attempt ran"))
    }
}
