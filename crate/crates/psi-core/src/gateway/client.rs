use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::fsutil::sha256_hex;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    /// Whether a retry could plausibly succeed (rate limits, 5xx, timeouts).
    pub retryable: bool,
}

impl TransportError {
    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: false,
        }
    }

    pub fn transient(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

impl DecodingParams {
    /// Hex digest of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("params serialize").as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: Option<String>,
    pub user: String,
}

impl ChatRequest {
    pub fn user(text: impl Into<String>) -> Self {
        ChatRequest {
            system: None,
            user: text.into(),
        }
    }

    /// Hash of the full prompt. With no system text this is the SHA-256 of
    /// the user text itself, so fixture files can be named by hashing a
    /// rendered prompt directly.
    pub fn digest(&self) -> String {
        match &self.system {
            None => sha256_hex(self.user.as_bytes()),
            Some(system) => {
                let framed = format!(
                    "system:{}:{}user:{}:{}",
                    system.len(),
                    system,
                    self.user.len(),
                    self.user
                );
                sha256_hex(framed.as_bytes())
            }
        }
    }
}

/// Minimal chat contract every provider adapter implements.
pub trait ChatClient: Send + Sync {
    fn model_id(&self) -> &str;
    fn params(&self) -> DecodingParams;
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Serves canned replies from `{dir}/{prompt_digest}.txt`.
#[derive(Debug)]
pub struct FixtureClient {
    model_id: String,
    params: DecodingParams,
    dir: PathBuf,
    calls: AtomicUsize,
}

impl FixtureClient {
    pub fn new(model_id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        FixtureClient {
            model_id: model_id.into(),
            params: DecodingParams::default(),
            dir: dir.into(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_params(mut self, params: DecodingParams) -> Self {
        self.params = params;
        self
    }

    /// Number of `complete` calls so far, hits or misses.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for FixtureClient {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn params(&self) -> DecodingParams {
        self.params
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let path = self.dir.join(format!("{}.txt", request.digest()));
        fs::read_to_string(&path)
            .map_err(|e| TransportError::fatal(format!("no fixture reply at {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// OpenAI-compatible `/chat/completions`.
    Openai,
    Anthropic,
    Gemini,
    /// Recorded replies on disk; needs `fixture_dir`.
    Fixture,
}

fn default_temperature() -> f64 {
    0.0
}
fn default_max_tokens() -> u32 {
    256
}
fn default_timeout() -> u64 {
    60
}

/// A named endpoint as written in the pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub name: String,
    pub provider: Provider,
    pub model: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl EndpointConfig {
    pub fn params(&self) -> DecodingParams {
        DecodingParams {
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }

    /// Instantiates the adapter. Reads the API key from the environment for
    /// network providers.
    pub fn build(&self) -> Result<Box<dyn ChatClient>, TransportError> {
        match self.provider {
            Provider::Fixture => {
                let dir = self.fixture_dir.clone().ok_or_else(|| {
                    TransportError::fatal(format!("endpoint {}: fixture provider needs fixture_dir", self.name))
                })?;
                Ok(Box::new(
                    FixtureClient::new(&self.model, dir).with_params(self.params()),
                ))
            }
            _ => Ok(Box::new(HttpChatClient::new(self.clone())?)),
        }
    }
}

pub fn openai_request_body(model: &str, params: DecodingParams, request: &ChatRequest) -> Value {
    let mut messages = Vec::new();
    if let Some(system) = &request.system {
        messages.push(json!({"role": "system", "content": system}));
    }
    messages.push(json!({"role": "user", "content": request.user}));
    json!({
        "model": model,
        "messages": messages,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
    })
}

pub fn anthropic_request_body(model: &str, params: DecodingParams, request: &ChatRequest) -> Value {
    let mut body = json!({
        "model": model,
        "max_tokens": params.max_tokens,
        "temperature": params.temperature,
        "messages": [{"role": "user", "content": request.user}],
    });
    if let Some(system) = &request.system {
        body["system"] = json!(system);
    }
    body
}

pub fn gemini_request_body(params: DecodingParams, request: &ChatRequest) -> Value {
    let mut body = json!({
        "contents": [{"role": "user", "parts": [{"text": request.user}]}],
        "generationConfig": {
            "temperature": params.temperature,
            "maxOutputTokens": params.max_tokens,
        },
    });
    if let Some(system) = &request.system {
        body["systemInstruction"] = json!({"parts": [{"text": system}]});
    }
    body
}

fn missing(provider: &str) -> TransportError {
    TransportError::fatal(format!("{provider} response has no text content"))
}

pub fn extract_openai_text(body: &Value) -> Result<String, TransportError> {
    body["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| missing("openai"))
}

pub fn extract_anthropic_text(body: &Value) -> Result<String, TransportError> {
    let parts: Vec<&str> = body["content"]
        .as_array()
        .ok_or_else(|| missing("anthropic"))?
        .iter()
        .filter(|b| b["type"] == "text")
        .filter_map(|b| b["text"].as_str())
        .collect();
    if parts.is_empty() {
        return Err(missing("anthropic"));
    }
    Ok(parts.concat())
}

pub fn extract_gemini_text(body: &Value) -> Result<String, TransportError> {
    let parts: Vec<&str> = body["candidates"][0]["content"]["parts"]
        .as_array()
        .ok_or_else(|| missing("gemini"))?
        .iter()
        .filter_map(|p| p["text"].as_str())
        .collect();
    if parts.is_empty() {
        return Err(missing("gemini"));
    }
    Ok(parts.concat())
}

/// Blocking HTTP adapter for the network providers.
pub struct HttpChatClient {
    config: EndpointConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(config: EndpointConfig) -> Result<Self, TransportError> {
        let var = config.api_key_env.clone().unwrap_or_else(|| match config.provider {
            Provider::Openai => "OPENAI_API_KEY".into(),
            Provider::Anthropic => "ANTHROPIC_API_KEY".into(),
            _ => "GEMINI_API_KEY".into(),
        });
        let api_key = std::env::var(&var).map_err(|_| {
            TransportError::fatal(format!(
                "endpoint {}: environment variable {var} is not set",
                config.name
            ))
        })?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        Ok(HttpChatClient { config, api_key, agent })
    }

    fn base_url(&self) -> &str {
        if let Some(url) = &self.config.base_url {
            return url.trim_end_matches('/');
        }
        match self.config.provider {
            Provider::Openai => "https://api.openai.com/v1",
            Provider::Anthropic => "https://api.anthropic.com/v1",
            _ => "https://generativelanguage.googleapis.com/v1beta",
        }
    }

    fn post(&self, request: ureq::Request, body: Value) -> Result<Value, TransportError> {
        match request.send_json(body) {
            Ok(resp) => resp
                .into_json::<Value>()
                .map_err(|e| TransportError::transient(format!("reading response: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                let message = format!("HTTP {code}: {}", detail.chars().take(300).collect::<String>());
                if code == 429 || code >= 500 {
                    Err(TransportError::transient(message))
                } else {
                    Err(TransportError::fatal(message))
                }
            }
            Err(e) => Err(TransportError::transient(e.to_string())),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn params(&self) -> DecodingParams {
        self.config.params()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let params = self.params();
        let model = &self.config.model;
        match self.config.provider {
            Provider::Openai => {
                let req = self
                    .agent
                    .post(&format!("{}/chat/completions", self.base_url()))
                    .set("Authorization", &format!("Bearer {}", self.api_key));
                extract_openai_text(&self.post(req, openai_request_body(model, params, request))?)
            }
            Provider::Anthropic => {
                let req = self
                    .agent
                    .post(&format!("{}/messages", self.base_url()))
                    .set("x-api-key", &self.api_key)
                    .set("anthropic-version", "2023-06-01");
                extract_anthropic_text(&self.post(req, anthropic_request_body(model, params, request))?)
            }
            Provider::Gemini => {
                let req = self
                    .agent
                    .post(&format!("{}/models/{model}:generateContent", self.base_url()))
                    .set("x-goog-api-key", &self.api_key);
                extract_gemini_text(&self.post(req, gemini_request_body(params, request))?)
            }
            Provider::Fixture => Err(TransportError::fatal("fixture endpoints are not served over HTTP")),
        }
    }
}
