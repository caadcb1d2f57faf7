//! OpenAI-compatible chat-completions backend. Transport and non-2xx
//! failures surface as retryable transport errors; the gateway owns retries.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::CompletionRequest;
use crate::error::{Error, Result};

pub const ENV_BASE_URL: &str = "RELEX_BASE_URL";
pub const ENV_MODEL: &str = "RELEX_MODEL";
pub const ENV_API_KEY: &str = "RELEX_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL including any `/v1` prefix the service expects.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    /// Read endpoint, model, and key from `RELEX_BASE_URL`, `RELEX_MODEL`,
    /// and `RELEX_API_KEY`.
    pub fn from_env() -> Result<Self> {
        let base_url = std::env::var(ENV_BASE_URL)
            .map_err(|_| Error::Config(format!("{ENV_BASE_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| Error::Config(format!("{ENV_MODEL} is not set")))?;
        Ok(HttpConfig {
            base_url,
            model,
            api_key: std::env::var(ENV_API_KEY).ok(),
            timeout: Duration::from_secs(60),
        })
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    stop: Vec<String>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpBackend { config, client })
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<String> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &req.prompt,
            }],
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            stop: req.stop_sequences.clone(),
        };
        let mut builder = self.client.post(&url).json(&body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(Error::Transport(format!("{url} returned {status}: {text}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| Error::Transport(format!("{url}: invalid response body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Transport(format!("{url}: response had no choices")))
    }
}
