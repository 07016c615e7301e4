//! Chat-completion gateway with scripted replay, response caching and call
//! accounting.

mod backend;
mod fixtures;
mod openai;
mod prompt;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    backend_registry, load_scripted, BackendConfig, BackendRegistry, CachedBackend, ChatBackend, LiveBackend,
    PlaybookBackend, PlaybookEntry, ScriptedBackend,
};
pub use fixtures::{FixtureAudit, FixtureSet, FixtureValue, ResponseCache};
pub use openai::OpenAiClient;
pub use prompt::{
    ids as template_ids, render_prompt, FewShot, PromptInput, PromptLayout, PromptLibrary, PromptTemplate,
    RenderedPrompt,
};

use crate::registry::UnknownStrategy;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no scripted response for request {hash} ({stage}: {question:?})")]
    FixtureMiss {
        hash: String,
        stage: String,
        question: String,
    },
    #[error("no cached response for request {hash} ({stage}: {question:?})")]
    CacheMiss {
        hash: String,
        stage: String,
        question: String,
    },
    #[error("API error (status {status:?}) after {retries} retries: {message}")]
    Api {
        status: Option<u16>,
        retries: u32,
        message: String,
    },
    #[error("request timed out after {retries} retries")]
    Timeout { retries: u32 },
    #[error("scripted error: {0}")]
    Injected(String),
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("invalid fixture or cache file {path}: {message}")]
    BadFixture { path: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("backend misconfigured: {0}")]
    Config(String),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

/// Audit metadata carried alongside a request. It is not part of the
/// request hash.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestLabel {
    pub stage: String,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_id: String,
    pub system_instruction: String,
    pub user_content: String,
    pub temperature: f32,
    #[serde(skip)]
    pub label: RequestLabel,
}

#[derive(Serialize)]
struct HashedFields<'a> {
    model_id: &'a str,
    system_instruction: &'a str,
    user_content: &'a str,
    temperature: f32,
}

impl LlmRequest {
    pub fn new(model_id: &str, prompt: RenderedPrompt) -> Self {
        Self {
            model_id: model_id.to_string(),
            system_instruction: prompt.system,
            user_content: prompt.user,
            temperature: 0.0,
            label: RequestLabel::default(),
        }
    }

    pub fn with_temperature(mut self, temperature: f32) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn labeled(mut self, stage: &str, question: &str) -> Self {
        self.label = RequestLabel {
            stage: stage.to_string(),
            question: question.to_string(),
        };
        self
    }

    /// SHA-256 over (model_id, system_instruction, user_content, temperature).
    pub fn hash(&self) -> String {
        let fields = HashedFields {
            model_id: &self.model_id,
            system_instruction: &self.system_instruction,
            user_content: &self.user_content,
            temperature: self.temperature,
        };
        let bytes = serde_json::to_vec(&fields).expect("request serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseOrigin {
    Scripted,
    Cached,
    Live,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub backend: ResponseOrigin,
    pub token_estimate: usize,
}

impl LlmResponse {
    pub fn new(text: String, backend: ResponseOrigin) -> Self {
        let token_estimate = text.chars().count().div_ceil(4);
        Self {
            text,
            backend,
            token_estimate,
        }
    }
}

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap();
        while *n == 0 {
            n = self.freed.wait(n).unwrap();
        }
        *n -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

/// Shared front door to a chat backend. Counts every call and can record
/// served responses into a replayable fixture file.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    calls: AtomicU64,
    recorder: Option<Mutex<FixtureSet>>,
    permits: Semaphore,
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self {
            backend,
            calls: AtomicU64::new(0),
            recorder: None,
            permits: Semaphore::new(8),
        }
    }

    pub fn with_parallelism(mut self, cap: usize) -> Self {
        self.permits = Semaphore::new(cap);
        self
    }

    /// Keep every served response so it can be written with [`Gateway::save_recording`].
    pub fn recording(mut self) -> Self {
        self.recorder = Some(Mutex::new(FixtureSet::default()));
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let _permit = self.permits.acquire();
        self.calls.fetch_add(1, Ordering::SeqCst);
        let result = self.backend.complete(request);
        if let Some(recorder) = &self.recorder {
            let value = match &result {
                Ok(resp) => Some(FixtureValue::Text(resp.text.clone())),
                Err(LlmError::Injected(msg)) => Some(FixtureValue::Error { error: msg.clone() }),
                Err(_) => None,
            };
            if let Some(value) = value {
                recorder.lock().unwrap().insert(request, value);
            }
        }
        result
    }

    pub fn recorded(&self) -> Option<FixtureSet> {
        self.recorder.as_ref().map(|r| r.lock().unwrap().clone())
    }

    /// Writes recorded fixtures plus the audit sidecar next to `path`,
    /// merged into whatever fixtures the file already holds.
    pub fn save_recording(&self, path: &Path) -> Result<Option<PathBuf>, LlmError> {
        let Some(recorded) = self.recorded() else {
            return Ok(None);
        };
        let mut set = if path.exists() {
            FixtureSet::load_with_audit(path)?
        } else {
            FixtureSet::default()
        };
        set.merge(recorded);
        Ok(Some(set.save(path)?))
    }
}
