//! Chat-completion client used by the anticipation and summarization
//! experiments.
//!
//! Requests go through a [`ChatTransport`]. [`HttpTransport`] talks to a
//! chat-completion endpoint; [`MockTransport`] replays recorded completions
//! and is fully deterministic. [`LlmClient`] adds bounded exponential backoff
//! on retryable failures. A completion request has no side effects upstream,
//! so retrying it is safe; the service never retries its own log writes.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use easg_core::formats::Prompt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::LlmConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Wire format of a chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn from_prompt(prompt: &Prompt, cfg: &LlmConfig) -> Self {
        Self {
            model: cfg.model.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: prompt.system_text.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: prompt.user_text.clone(),
                },
            ],
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
        }
    }

    /// Content of the last user message.
    pub fn user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    /// Rate limits, server errors, timeouts and dropped connections.
    #[error("retryable: {message}")]
    Retryable {
        message: String,
        retry_after_ms: Option<u64>,
    },
    #[error("{message}")]
    Fatal { message: String },
}

#[async_trait]
pub trait ChatTransport: Send + Sync {
    /// Text of the first choice.
    async fn send(&self, req: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message} (after {attempts} attempt(s))")]
pub struct LlmError {
    pub message: String,
    pub attempts: u32,
    /// Suggested wait before trying again, absent for fatal errors.
    pub retry_after_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

pub struct LlmClient {
    transport: Box<dyn ChatTransport>,
    cfg: LlmConfig,
}

impl LlmClient {
    pub fn new(transport: Box<dyn ChatTransport>, cfg: LlmConfig) -> Self {
        Self { transport, cfg }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }

    fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.cfg
            .initial_backoff
            .saturating_mul(factor)
            .min(self.cfg.max_backoff)
    }

    pub async fn complete(&self, prompt: &Prompt) -> Result<Completion, LlmError> {
        let req = ChatRequest::from_prompt(prompt, &self.cfg);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.transport.send(&req).await {
                Ok(text) => return Ok(Completion { text, attempts }),
                Err(TransportError::Fatal { message }) => {
                    return Err(LlmError {
                        message,
                        attempts,
                        retry_after_ms: None,
                    })
                }
                Err(TransportError::Retryable {
                    message,
                    retry_after_ms,
                }) => {
                    let wait = retry_after_ms
                        .map(Duration::from_millis)
                        .unwrap_or_else(|| self.backoff(attempts - 1))
                        .min(self.cfg.max_backoff);
                    if attempts > self.cfg.max_retries {
                        return Err(LlmError {
                            message,
                            attempts,
                            retry_after_ms: Some(wait.as_millis() as u64),
                        });
                    }
                    tokio::time::sleep(wait).await;
                }
            }
        }
    }
}

/// Replays recorded completions keyed by the user message.
#[derive(Default)]
pub struct MockTransport {
    recorded: HashMap<String, String>,
    fallback: Option<String>,
    failures: Mutex<u32>,
    fatal: bool,
    calls: Mutex<Vec<ChatRequest>>,
}

impl MockTransport {
    /// Answers every request with `completion`.
    pub fn fixed(completion: impl Into<String>) -> Self {
        Self {
            fallback: Some(completion.into()),
            ..Self::default()
        }
    }

    /// Answers requests whose user message matches a recorded one.
    pub fn recorded(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            recorded: pairs.into_iter().collect(),
            ..Self::default()
        }
    }

    /// Fails the next `n` calls with a retryable error.
    pub fn failing_first(self, n: u32) -> Self {
        *self.failures.lock().unwrap() = n;
        self
    }

    /// Fails every call with a fatal error.
    pub fn always_fatal() -> Self {
        Self {
            fatal: true,
            ..Self::default()
        }
    }

    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().unwrap().clone()
    }
}

#[async_trait]
impl ChatTransport for MockTransport {
    async fn send(&self, req: &ChatRequest) -> Result<String, TransportError> {
        self.calls.lock().unwrap().push(req.clone());
        if self.fatal {
            return Err(TransportError::Fatal {
                message: "mock transport refuses every request".into(),
            });
        }
        {
            let mut left = self.failures.lock().unwrap();
            if *left > 0 {
                *left -= 1;
                return Err(TransportError::Retryable {
                    message: "mock transport: simulated 503".into(),
                    retry_after_ms: None,
                });
            }
        }
        self.recorded
            .get(req.user_text())
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| TransportError::Fatal {
                message: "no recorded completion for this prompt".into(),
            })
    }
}

/// Any [`ChatTransport`] behind a shared pointer, so tests can keep a handle
/// on a mock after handing it to the client.
#[async_trait]
impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    async fn send(&self, req: &ChatRequest) -> Result<String, TransportError> {
        (**self).send(req).await
    }
}

pub struct HttpTransport {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &LlmConfig) -> Result<Self, TransportError> {
        let endpoint = cfg.endpoint.clone().ok_or_else(|| TransportError::Fatal {
            message: "no endpoint configured".into(),
        })?;
        let client = reqwest::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| TransportError::Fatal {
                message: e.to_string(),
            })?;
        Ok(Self {
            client,
            endpoint,
            api_key: cfg.api_key.clone(),
        })
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    message: Option<ChatMessage>,
    /// Older completion endpoints return plain text.
    #[serde(default)]
    text: Option<String>,
}

fn retry_after(headers: &reqwest::header::HeaderMap) -> Option<u64> {
    let secs: f64 = headers
        .get(reqwest::header::RETRY_AFTER)?
        .to_str()
        .ok()?
        .trim()
        .parse()
        .ok()?;
    (secs.is_finite() && secs >= 0.0).then_some((secs * 1000.0) as u64)
}

#[async_trait]
impl ChatTransport for HttpTransport {
    async fn send(&self, req: &ChatRequest) -> Result<String, TransportError> {
        let mut call = self.client.post(&self.endpoint).json(req);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().await.map_err(|e| TransportError::Retryable {
            message: e.to_string(),
            retry_after_ms: None,
        })?;
        let status = resp.status();
        if !status.is_success() {
            let wait = retry_after(resp.headers());
            let body = resp.text().await.unwrap_or_default();
            let message = format!("upstream status {status}: {}", body.trim());
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                TransportError::Retryable {
                    message,
                    retry_after_ms: wait,
                }
            } else {
                TransportError::Fatal { message }
            });
        }
        let body: WireResponse = resp.json().await.map_err(|e| TransportError::Fatal {
            message: format!("malformed completion: {e}"),
        })?;
        body.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.map(|m| m.content).or(c.text))
            .ok_or_else(|| TransportError::Fatal {
                message: "completion has no choices".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use easg_core::formats::OutputKind;

    fn prompt() -> Prompt {
        Prompt {
            system_text: "sys".into(),
            user_text: "user".into(),
            expected_output_kind: OutputKind::Summary,
        }
    }

    fn quick() -> LlmConfig {
        LlmConfig {
            initial_backoff: Duration::from_millis(1),
            max_backoff: Duration::from_millis(4),
            max_retries: 2,
            ..LlmConfig::default()
        }
    }

    #[tokio::test]
    async fn retries_then_succeeds() {
        let c = LlmClient::new(
            Box::new(MockTransport::fixed("ok").failing_first(2)),
            quick(),
        );
        let out = c.complete(&prompt()).await.unwrap();
        assert_eq!(
            out,
            Completion {
                text: "ok".into(),
                attempts: 3
            }
        );
    }

    #[tokio::test]
    async fn gives_up_after_budget() {
        let c = LlmClient::new(
            Box::new(MockTransport::fixed("ok").failing_first(10)),
            quick(),
        );
        let e = c.complete(&prompt()).await.unwrap_err();
        assert_eq!(e.attempts, 3);
        assert_eq!(e.retry_after_ms, Some(4));
    }

    #[tokio::test]
    async fn fatal_is_not_retried() {
        let mock = std::sync::Arc::new(MockTransport::always_fatal());
        let c = LlmClient::new(Box::new(mock.clone()), quick());
        let e = c.complete(&prompt()).await.unwrap_err();
        assert_eq!((e.attempts, e.retry_after_ms), (1, None));
        assert_eq!(mock.calls().len(), 1);
    }

    #[test]
    fn backoff_is_bounded() {
        let c = LlmClient::new(Box::new(MockTransport::default()), LlmConfig::default());
        assert_eq!(c.backoff(0), Duration::from_millis(500));
        assert_eq!(c.backoff(2), Duration::from_secs(2));
        assert_eq!(c.backoff(40), Duration::from_secs(8));
    }

    #[test]
    fn request_wire_shape() {
        let r = ChatRequest::from_prompt(&prompt(), &LlmConfig::default());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["messages"][0]["role"], "system");
        assert_eq!(v["messages"][1]["content"], "user");
        assert_eq!(r.user_text(), "user");
    }
}
