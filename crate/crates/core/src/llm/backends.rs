use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde_json::Value;

use super::{
    request_hash, validate_messages, Cassette, CassetteEntry, ChatMessage, LlmBackend, LlmError, DEFAULT_TIMEOUT,
    MAX_RATE_LIMIT_RETRIES,
};

pub struct ReplayBackend {
    model: String,
    temperature: f64,
    responses: HashMap<String, Vec<String>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn new(model: &str, temperature: f64, cassette: Cassette) -> Self {
        let responses = cassette
            .by_hash()
            .into_iter()
            .map(|(h, es)| (h.to_string(), es.into_iter().map(|e| e.response.clone()).collect()))
            .collect();
        ReplayBackend { model: model.to_string(), temperature, responses, cursors: Mutex::new(HashMap::new()) }
    }
}

impl LlmBackend for ReplayBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        validate_messages(messages)?;
        let hash = request_hash(&self.model, self.temperature, messages);
        let Some(list) = self.responses.get(&hash) else {
            return Err(LlmError::UnmatchedTranscript { hash });
        };
        let mut cursors = self.cursors.lock().expect("replay cursor lock");
        let cursor = cursors.entry(hash).or_insert(0);
        let response = list[(*cursor).min(list.len() - 1)].clone();
        *cursor += 1;
        Ok(response)
    }
}

/// Returns queued responses in FIFO order and logs every request.
pub struct ScriptedMock {
    model: String,
    queue: Mutex<VecDeque<String>>,
    log: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedMock {
    pub fn new<S: Into<String>>(model: &str, responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedMock {
            model: model.to_string(),
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            log: Mutex::new(vec![]),
        }
    }

    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.log.lock().expect("mock log lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("mock queue lock").len()
    }
}

impl LlmBackend for ScriptedMock {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        validate_messages(messages)?;
        self.log.lock().expect("mock log lock").push(messages.to_vec());
        self.queue.lock().expect("mock queue lock").pop_front().ok_or(LlmError::ScriptExhausted)
    }
}

/// Chat-completions client: POSTs `{model, temperature, messages}` and
/// returns `choices[0].message.content`. HTTP 429 is retried with
/// exponential backoff, at most three times.
pub struct HttpBackend {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    pub backoff: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, model: &str) -> Self {
        HttpBackend {
            endpoint: endpoint.into(),
            model: model.to_string(),
            temperature: 0.0,
            api_key_env: None,
            timeout: DEFAULT_TIMEOUT,
            backoff: Duration::from_millis(500),
        }
    }

    fn send(&self, agent: &ureq::Agent, body: &Value) -> Result<Value, ureq::Error> {
        let mut req = agent.post(&self.endpoint);
        if let Some(var) = &self.api_key_env {
            if let Ok(key) = std::env::var(var) {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
        }
        req.send_json(body)?.body_mut().read_json()
    }
}

impl LlmBackend for HttpBackend {
    fn model(&self) -> &str {
        &self.model
    }

    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        validate_messages(messages)?;
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        });
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.send(&agent, &body) {
                Ok(v) => {
                    return v["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_string)
                        .ok_or_else(|| LlmError::Transport("response has no choices[0].message.content".into()))
                }
                Err(ureq::Error::StatusCode(429)) => {
                    if attempt > MAX_RATE_LIMIT_RETRIES {
                        return Err(LlmError::RateLimited { attempts: attempt });
                    }
                    tracing::warn!(attempt, "rate limited, backing off");
                    thread::sleep(self.backoff * 2u32.pow(attempt - 1));
                }
                Err(e) => return Err(LlmError::Transport(e.to_string())),
            }
        }
    }
}

/// Forwards to `inner` and appends each exchange to a cassette file, which
/// is rewritten after every call so it stays valid JSON.
pub struct RecordingBackend {
    inner: Box<dyn LlmBackend>,
    path: PathBuf,
    cassette: Mutex<Cassette>,
}

impl RecordingBackend {
    pub fn open(inner: Box<dyn LlmBackend>, path: PathBuf) -> Result<Self, LlmError> {
        let cassette = if path.exists() { Cassette::load(&path)? } else { Cassette::default() };
        Ok(RecordingBackend { inner, path, cassette: Mutex::new(cassette) })
    }

    pub fn cassette(&self) -> Cassette {
        self.cassette.lock().expect("cassette lock").clone()
    }
}

impl LlmBackend for RecordingBackend {
    fn model(&self) -> &str {
        self.inner.model()
    }

    fn temperature(&self) -> f64 {
        self.inner.temperature()
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let response = self.inner.complete(messages)?;
        let mut cassette = self.cassette.lock().expect("cassette lock");
        cassette.entries.push(CassetteEntry {
            hash: request_hash(self.model(), self.temperature(), messages),
            model: self.model().to_string(),
            messages: messages.to_vec(),
            response: response.clone(),
        });
        cassette.save(&self.path)?;
        Ok(response)
    }
}
