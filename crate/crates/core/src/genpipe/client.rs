use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_ENDPOINT: &str = "LLM_ENDPOINT";
pub const ENV_MODEL: &str = "LLM_MODEL";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("no recorded response for request {hash}")]
    MissingFixture { hash: String },
    #[error("{0}")]
    NotConfigured(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("fixture io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmMode {
    Live,
    Replay,
    Record,
}

impl std::str::FromStr for LlmMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "live" => Ok(LlmMode::Live),
            "replay" => Ok(LlmMode::Replay),
            "record" => Ok(LlmMode::Record),
            _ => Err(format!("unknown LLM mode '{s}' (live, replay, record)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Body of a chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(model: &str, system: &str, user: &str, temperature: f64) -> Self {
        Self {
            model: model.to_owned(),
            messages: vec![
                ChatMessage { role: "system".into(), content: system.to_owned() },
                ChatMessage { role: "user".into(), content: user.to_owned() },
            ],
            temperature,
        }
    }

    pub fn body(&self) -> String {
        serde_json::to_string(self).expect("request serialization is infallible")
    }

    /// Hex SHA-256 of the compact JSON body; the replay key.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.body().as_bytes()))
    }

    pub fn user(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == "user").map_or("", |m| m.content.as_str())
    }
}

/// One archived request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub request_sha256: String,
    pub request: ChatRequest,
    pub response: String,
}

/// Something that answers chat requests.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

/// OpenAI-style chat-completions endpoint over HTTPS. Rate-limit and server
/// errors are retried with exponential backoff.
pub struct HttpBackend {
    pub endpoint: String,
    pub api_key: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
}

impl HttpBackend {
    pub fn new(endpoint: &str, api_key: &str) -> Self {
        Self {
            endpoint: endpoint.to_owned(),
            api_key: api_key.to_owned(),
            timeout: Duration::from_secs(120),
            max_retries: 4,
            backoff: Duration::from_secs(2),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut attempt = 0;
        loop {
            let result = agent
                .post(&self.endpoint)
                .set("Authorization", &format!("Bearer {}", self.api_key))
                .set("Content-Type", "application/json")
                .send_string(&request.body());
            match result {
                Ok(resp) => {
                    let value: serde_json::Value =
                        resp.into_json().map_err(|e| LlmError::BadResponse(e.to_string()))?;
                    return value["choices"][0]["message"]["content"]
                        .as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| LlmError::BadResponse("no choices[0].message.content".into()));
                }
                Err(ureq::Error::Status(status, resp)) if (status == 429 || status >= 500) && attempt < self.max_retries => {
                    log::warn!("HTTP {status} from LLM endpoint; retrying");
                    drop(resp);
                }
                Err(ureq::Error::Status(status, resp)) => {
                    return Err(LlmError::Http { status, body: resp.into_string().unwrap_or_default() });
                }
                Err(e) if attempt < self.max_retries => log::warn!("LLM request failed ({e}); retrying"),
                Err(e) => return Err(LlmError::Network(e.to_string())),
            }
            std::thread::sleep(self.backoff * 2u32.pow(attempt));
            attempt += 1;
        }
    }
}

/// Returns canned responses in order, then repeats the last one.
pub struct ScriptedBackend {
    responses: Vec<String>,
    next: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self { responses: responses.into_iter().map(Into::into).collect(), next: Mutex::new(0) }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, _: &ChatRequest) -> Result<String, LlmError> {
        let mut next = self.next.lock().expect("scripted backend lock");
        let r = self
            .responses
            .get((*next).min(self.responses.len().saturating_sub(1)))
            .cloned()
            .ok_or_else(|| LlmError::NotConfigured("scripted backend has no responses".into()))?;
        *next += 1;
        Ok(r)
    }
}

/// Recorded responses grouped by request hash, served in recording order.
#[derive(Debug, Default)]
struct ReplayStore {
    responses: BTreeMap<String, Vec<String>>,
    cursor: BTreeMap<String, usize>,
}

impl ReplayStore {
    fn load(dir: &Path) -> Result<Self, LlmError> {
        let mut files: Vec<(u64, PathBuf)> = Vec::new();
        let entries = fs::read_dir(dir).map_err(|e| LlmError::Io(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| LlmError::Io(e.to_string()))?.path();
            if path.extension().is_some_and(|x| x == "json") {
                let n = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()).unwrap_or(u64::MAX);
                files.push((n, path));
            }
        }
        files.sort();
        let mut store = Self::default();
        for (_, path) in files {
            let text = fs::read_to_string(&path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
            let t: Transcript =
                serde_json::from_str(&text).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
            store.responses.entry(t.request_sha256).or_default().push(t.response);
        }
        Ok(store)
    }

    fn next(&mut self, hash: &str) -> Option<String> {
        let list = self.responses.get(hash)?;
        let i = self.cursor.entry(hash.to_owned()).or_default();
        let r = list[(*i).min(list.len() - 1)].clone();
        *i += 1;
        Some(r)
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn acquire(&self) {
        let mut n = self.slots.lock().expect("gate lock");
        while *n == 0 {
            n = self.freed.wait(n).expect("gate lock");
        }
        *n -= 1;
    }

    fn release(&self) {
        *self.slots.lock().expect("gate lock") += 1;
        self.freed.notify_one();
    }
}

/// Chat client with live, replay and record modes. Replay never touches the
/// network: it only reads transcripts from the fixture directory.
pub struct ChatClient {
    model: String,
    mode: LlmMode,
    fixtures: Option<PathBuf>,
    backend: Option<Box<dyn ChatBackend>>,
    store: Mutex<ReplayStore>,
    history: Mutex<Vec<Transcript>>,
    gate: Gate,
}

impl ChatClient {
    fn build(model: &str, mode: LlmMode, fixtures: Option<PathBuf>, backend: Option<Box<dyn ChatBackend>>) -> Self {
        Self {
            model: model.to_owned(),
            mode,
            fixtures,
            backend,
            store: Mutex::new(ReplayStore::default()),
            history: Mutex::new(Vec::new()),
            gate: Gate { slots: Mutex::new(DEFAULT_MAX_IN_FLIGHT), freed: Condvar::new() },
        }
    }

    /// Serves responses from `<dir>/<n>.json` transcripts.
    pub fn replay(dir: &Path, model: &str) -> Result<Self, LlmError> {
        let mut c = Self::build(model, LlmMode::Replay, Some(dir.to_owned()), None);
        c.store = Mutex::new(ReplayStore::load(dir)?);
        Ok(c)
    }

    pub fn live(backend: Box<dyn ChatBackend>, model: &str) -> Self {
        Self::build(model, LlmMode::Live, None, Some(backend))
    }

    /// Forwards to `backend` and archives each exchange as `<dir>/<n>.json`.
    pub fn record(backend: Box<dyn ChatBackend>, dir: &Path, model: &str) -> Result<Self, LlmError> {
        fs::create_dir_all(dir).map_err(|e| LlmError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self::build(model, LlmMode::Record, Some(dir.to_owned()), Some(backend)))
    }

    /// Builds a client from `LLM_ENDPOINT`, `LLM_MODEL` and `LLM_API_KEY`.
    /// Replay mode needs only the fixture directory.
    pub fn from_env(mode: LlmMode, fixtures: Option<&Path>, model: Option<&str>) -> Result<Self, LlmError> {
        let model = model.map(str::to_owned).or_else(|| std::env::var(ENV_MODEL).ok()).unwrap_or_else(|| DEFAULT_MODEL.into());
        let need_dir = || fixtures.ok_or_else(|| LlmError::NotConfigured(format!("{mode:?} mode needs a fixture directory")));
        if mode == LlmMode::Replay {
            return Self::replay(need_dir()?, &model);
        }
        let key = std::env::var(ENV_API_KEY).map_err(|_| LlmError::NotConfigured(format!("{ENV_API_KEY} is not set")))?;
        let endpoint = std::env::var(ENV_ENDPOINT).unwrap_or_else(|_| DEFAULT_ENDPOINT.into());
        let backend = Box::new(HttpBackend::new(&endpoint, &key));
        match mode {
            LlmMode::Record => Self::record(backend, need_dir()?, &model),
            _ => Ok(Self::live(backend, &model)),
        }
    }

    pub fn with_max_in_flight(self, n: usize) -> Self {
        *self.gate.slots.lock().expect("gate lock") = n.max(1);
        self
    }

    pub fn mode(&self) -> LlmMode {
        self.mode
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn fixtures(&self) -> Option<&Path> {
        self.fixtures.as_deref()
    }

    /// Every exchange made through this client, in order.
    pub fn history(&self) -> Vec<Transcript> {
        self.history.lock().expect("history lock").clone()
    }

    pub fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, LlmError> {
        let request = ChatRequest::new(&self.model, system, user, temperature);
        let hash = request.hash();
        let response = match self.mode {
            LlmMode::Replay => self
                .store
                .lock()
                .expect("replay lock")
                .next(&hash)
                .ok_or_else(|| LlmError::MissingFixture { hash: hash.clone() })?,
            LlmMode::Live | LlmMode::Record => {
                let backend = self.backend.as_ref().ok_or_else(|| LlmError::NotConfigured("no backend".into()))?;
                self.gate.acquire();
                let r = backend.complete(&request);
                self.gate.release();
                r?
            }
        };
        let transcript = Transcript { request_sha256: hash, request, response: response.clone() };
        let mut history = self.history.lock().expect("history lock");
        if self.mode == LlmMode::Record {
            let dir = self.fixtures.as_ref().expect("record mode has a directory");
            let path = dir.join(format!("{}.json", history.len()));
            let text = serde_json::to_string_pretty(&transcript).expect("transcript serialization is infallible");
            fs::write(&path, text + "\n").map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        }
        history.push(transcript);
        Ok(response)
    }
}

/// Strips a surrounding markdown code fence, which chat models add despite
/// instructions.
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}
