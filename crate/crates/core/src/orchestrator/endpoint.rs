//! Chat-completions client and the model abstraction shared with the mocks.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{OrchestratorError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key, if any.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for ModelEndpoint {
    fn default() -> Self {
        ModelEndpoint {
            base_url: "http://localhost:8000/v1".into(),
            model_name: "qwen3-14b".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            temperature: 0.2,
            max_tokens: 4096,
            timeout_secs: 120,
            max_retries: 5,
            initial_backoff_ms: 500,
        }
    }
}

impl ModelEndpoint {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(OrchestratorError::Config("temperature must lie in [0, 2]".into()));
        }
        if self.max_tokens == 0 {
            return Err(OrchestratorError::Config("max_tokens must be at least 1".into()));
        }
        if self.timeout_secs == 0 {
            return Err(OrchestratorError::Config("timeout_secs must be positive".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(OrchestratorError::Config(format!("base_url `{}` is not an http(s) URL", self.base_url)));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub content: String,
    pub usage: Option<Usage>,
    pub retries: u32,
}

impl ChatReply {
    pub fn text(content: impl Into<String>) -> Self {
        ChatReply { content: content.into(), usage: None, retries: 0 }
    }
}

/// Anything that can answer a chat request. Implementations must be usable
/// from several threads at once.
pub trait ChatModel: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply>;

    /// Default sampling settings for this model.
    fn defaults(&self) -> (f64, u32) {
        (0.2, 4096)
    }
}

/// OpenAI-compatible `POST {base_url}/chat/completions` client.
pub struct HttpModel {
    endpoint: ModelEndpoint,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpModel {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self> {
        endpoint.validate()?;
        let api_key = match endpoint.api_key_env.as_deref().filter(|s| !s.is_empty()) {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                OrchestratorError::Config(format!("environment variable `{var}` with the API key is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| OrchestratorError::Config(format!("HTTP client: {e}")))?;
        Ok(HttpModel { endpoint, api_key, client })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.min(16);
        Duration::from_millis(self.endpoint.initial_backoff_ms.saturating_mul(factor))
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Extracts `choices[0].message.content` and `usage` from a response body.
pub fn parse_completion(body: &str) -> Result<(String, Option<Usage>)> {
    let value: Value = serde_json::from_str(body)
        .map_err(|e| OrchestratorError::Protocol(format!("response is not JSON: {e}")))?;
    let content = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| OrchestratorError::Protocol("response lacks choices[0].message.content".into()))?;
    let usage = value.get("usage").and_then(|u| serde_json::from_value(u.clone()).ok());
    Ok((content.to_owned(), usage))
}

impl ChatModel for HttpModel {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply> {
        let body = json!({
            "model": self.endpoint.model_name,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let url = self.endpoint.completions_url();
        let mut last_status = None;
        let mut last_message = String::new();
        for attempt in 0..=self.endpoint.max_retries {
            if attempt > 0 {
                thread::sleep(self.backoff(attempt - 1));
            }
            let mut builder = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                builder = builder.bearer_auth(key);
            }
            match builder.send() {
                Ok(response) => {
                    let status = response.status().as_u16();
                    let text = response.text().map_err(|e| OrchestratorError::Transport {
                        status: Some(status),
                        message: format!("reading body: {e}"),
                    })?;
                    if (200..300).contains(&status) {
                        let (content, usage) = parse_completion(&text)?;
                        return Ok(ChatReply { content, usage, retries: attempt });
                    }
                    last_status = Some(status);
                    last_message = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>());
                    if !retryable(status) {
                        break;
                    }
                    log::warn!("{url}: HTTP {status}, attempt {}", attempt + 1);
                }
                Err(e) => {
                    last_message = e.to_string();
                    log::warn!("{url}: {e}, attempt {}", attempt + 1);
                }
            }
        }
        Err(OrchestratorError::Transport { status: last_status, message: last_message })
    }

    fn defaults(&self) -> (f64, u32) {
        (self.endpoint.temperature, self.endpoint.max_tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_validation() {
        assert!(ModelEndpoint::default().validate().is_ok());
        let bad = ModelEndpoint { temperature: 2.5, ..ModelEndpoint::default() };
        assert!(bad.validate().is_err());
        let bad = ModelEndpoint { max_tokens: 0, ..ModelEndpoint::default() };
        assert!(bad.validate().is_err());
        let bad = ModelEndpoint { base_url: "localhost".into(), ..ModelEndpoint::default() };
        assert!(bad.validate().is_err());
        let e = ModelEndpoint { base_url: "http://h/v1/".into(), ..ModelEndpoint::default() };
        assert_eq!(e.completions_url(), "http://h/v1/chat/completions");
    }

    #[test]
    fn completion_parsing() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],
                      "usage":{"prompt_tokens":3,"completion_tokens":1,"total_tokens":4}}"#;
        let (text, usage) = parse_completion(body).unwrap();
        assert_eq!(text, "hi");
        assert_eq!(usage.unwrap().total_tokens, 4);
        assert!(matches!(parse_completion("<html>"), Err(OrchestratorError::Protocol(_))));
        assert!(matches!(parse_completion(r#"{"choices":[]}"#), Err(OrchestratorError::Protocol(_))));
    }

    #[test]
    fn missing_key_variable_is_a_config_error() {
        let e = ModelEndpoint {
            api_key_env: Some("CLIFF_TEST_SURELY_UNSET_VARIABLE".into()),
            ..ModelEndpoint::default()
        };
        assert!(matches!(HttpModel::new(e), Err(OrchestratorError::Config(_))));
    }

    #[test]
    fn retry_classification() {
        assert!(retryable(429));
        assert!(retryable(503));
        assert!(!retryable(400));
        assert!(!retryable(404));
    }
}
