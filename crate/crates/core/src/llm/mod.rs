//! Chat-completion boundary. Every model call in the pipeline goes through
//! [`LlmBackend`], which has three implementations: cassette replay, a
//! scripted FIFO mock, and an HTTP client for chat-completions endpoints.
//! [`RecordingBackend`] wraps any of them and appends to a cassette.

mod backends;
mod cassette;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backends::{HttpBackend, RecordingBackend, ReplayBackend, ScriptedMock};
pub use cassette::{Cassette, CassetteEntry, CASSETTE_SCHEMA};

use crate::canonical::to_canonical_compact;
use crate::rng::fnv1a64;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const MAX_RATE_LIMIT_RETRIES: u32 = 3;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded response for request {hash}")]
    UnmatchedTranscript { hash: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("invalid message: {0}")]
    InvalidMessage(String),
    #[error("cassette {path}: {message}")]
    Cassette { path: PathBuf, message: String },
    #[error("scripted mock has no responses left")]
    ScriptExhausted,
    #[error("invalid backend config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

pub fn validate_messages(messages: &[ChatMessage]) -> Result<(), LlmError> {
    if messages.is_empty() {
        return Err(LlmError::InvalidMessage("empty conversation".into()));
    }
    match messages.iter().position(|m| m.content.trim().is_empty()) {
        Some(i) => Err(LlmError::InvalidMessage(format!("message {i} has empty content"))),
        None => Ok(()),
    }
}

/// Hex FNV-1a 64 over the compact canonical JSON of model, temperature and
/// messages.
pub fn request_hash(model: &str, temperature: f64, messages: &[ChatMessage]) -> String {
    let body = serde_json::json!({
        "messages": messages,
        "model": model,
        "temperature": temperature,
    });
    let text = to_canonical_compact(&body).expect("request body serializes");
    format!("{:016x}", fnv1a64(text.as_bytes()))
}

pub trait LlmBackend: Send + Sync {
    fn model(&self) -> &str;

    fn temperature(&self) -> f64 {
        0.0
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for Arc<T> {
    fn model(&self) -> &str {
        (**self).model()
    }

    fn temperature(&self) -> f64 {
        (**self).temperature()
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).complete(messages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Replay,
    ScriptedMock,
    Http,
}

fn default_model() -> String {
    "replay".into()
}

fn default_timeout_secs() -> u64 {
    DEFAULT_TIMEOUT.as_secs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    /// Replay source, or the recording target when `record` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<PathBuf>,
    #[serde(default)]
    pub record: bool,
    /// Responses for the scripted mock, returned in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl BackendConfig {
    pub fn replay(cassette: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Replay,
            model: default_model(),
            temperature: 0.0,
            endpoint: None,
            api_key_env: None,
            cassette: Some(cassette.into()),
            record: false,
            script: vec![],
            timeout_secs: default_timeout_secs(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn LlmBackend>, LlmError> {
        let inner: Box<dyn LlmBackend> = match self.kind {
            BackendKind::Replay => {
                let path = self.cassette.as_ref().ok_or_else(|| LlmError::Config("replay needs a cassette".into()))?;
                Box::new(ReplayBackend::new(&self.model, self.temperature, Cassette::load(path)?))
            }
            BackendKind::ScriptedMock => Box::new(ScriptedMock::new(&self.model, self.script.clone())),
            BackendKind::Http => {
                let endpoint = self.endpoint.clone().ok_or_else(|| LlmError::Config("http needs an endpoint".into()))?;
                let mut b = HttpBackend::new(endpoint, &self.model);
                b.temperature = self.temperature;
                b.api_key_env = self.api_key_env.clone();
                b.timeout = Duration::from_secs(self.timeout_secs);
                Box::new(b)
            }
        };
        if self.record {
            if self.kind == BackendKind::Replay {
                return Err(LlmError::Config("cannot record while replaying".into()));
            }
            let path = self.cassette.clone().ok_or_else(|| LlmError::Config("recording needs a cassette path".into()))?;
            return Ok(Box::new(RecordingBackend::open(inner, path)?));
        }
        Ok(inner)
    }
}
