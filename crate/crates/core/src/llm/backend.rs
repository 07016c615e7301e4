use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::fixtures::{FixtureSet, FixtureValue, ResponseCache};
use super::openai::OpenAiClient;
use super::{LlmError, LlmRequest, LlmResponse, ResponseOrigin};
use crate::registry::Registry;

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

fn fixture_response(value: &FixtureValue, origin: ResponseOrigin) -> Result<LlmResponse, LlmError> {
    match value {
        FixtureValue::Text(text) => Ok(LlmResponse::new(text.clone(), origin)),
        FixtureValue::Error { error } => Err(LlmError::Injected(error.clone())),
    }
}

/// Replays responses keyed by request hash; a miss is an error.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    fixtures: BTreeMap<String, FixtureValue>,
}

impl ScriptedBackend {
    pub fn new(fixtures: BTreeMap<String, FixtureValue>) -> Self {
        Self { fixtures }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(FixtureSet::load(path)?))
    }

    pub fn len(&self) -> usize {
        self.fixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixtures.is_empty()
    }
}

impl ChatBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let hash = request.hash();
        match self.fixtures.get(&hash) {
            Some(value) => fixture_response(value, ResponseOrigin::Scripted),
            None => Err(LlmError::FixtureMiss {
                hash,
                stage: request.label.stage.clone(),
                question: request.label.question.clone(),
            }),
        }
    }
}

/// Hand-authored responses matched on (stage, question) rather than on the
/// full prompt. Useful for writing fixtures before the prompts settle;
/// record a run through it to obtain a hash-keyed fixture file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybookBackend {
    entries: Vec<PlaybookEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaybookEntry {
    /// `None` matches any stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub question: String,
    pub response: FixtureValue,
}

impl PlaybookEntry {
    pub fn text(stage: Option<&str>, question: &str, response: &str) -> Self {
        Self {
            stage: stage.map(str::to_string),
            question: question.to_string(),
            response: FixtureValue::Text(response.to_string()),
        }
    }

    pub fn error(stage: Option<&str>, question: &str, error: &str) -> Self {
        Self {
            stage: stage.map(str::to_string),
            question: question.to_string(),
            response: FixtureValue::Error {
                error: error.to_string(),
            },
        }
    }
}

impl PlaybookBackend {
    pub fn new(entries: Vec<PlaybookEntry>) -> Self {
        Self { entries }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)?;
        let entries: Vec<PlaybookEntry> = serde_json::from_str(&text).map_err(|e| LlmError::BadFixture {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self::new(entries))
    }
}

impl ChatBackend for PlaybookBackend {
    fn name(&self) -> &str {
        "playbook"
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let label = &request.label;
        let hit = self
            .entries
            .iter()
            .find(|e| e.question == label.question && e.stage.as_deref().is_none_or(|s| s == label.stage));
        match hit {
            Some(entry) => fixture_response(&entry.response, ResponseOrigin::Scripted),
            None => Err(LlmError::FixtureMiss {
                hash: request.hash(),
                stage: label.stage.clone(),
                question: label.question.clone(),
            }),
        }
    }
}

/// Serves only from the response cache; never touches the network.
#[derive(Debug, Clone)]
pub struct CachedBackend {
    cache: ResponseCache,
}

impl CachedBackend {
    pub fn new(cache: ResponseCache) -> Self {
        Self { cache }
    }
}

impl ChatBackend for CachedBackend {
    fn name(&self) -> &str {
        "cached"
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        match self.cache.get(request) {
            Some(text) => Ok(LlmResponse::new(text, ResponseOrigin::Cached)),
            None => Err(LlmError::CacheMiss {
                hash: request.hash(),
                stage: request.label.stage.clone(),
                question: request.label.question.clone(),
            }),
        }
    }
}

/// Calls the remote endpoint on a cache miss and writes every response
/// back to the cache.
#[derive(Debug, Clone)]
pub struct LiveBackend {
    client: OpenAiClient,
    cache: ResponseCache,
}

impl LiveBackend {
    pub fn new(client: OpenAiClient, cache: ResponseCache) -> Self {
        Self { client, cache }
    }
}

impl ChatBackend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        if let Some(text) = self.cache.get(request) {
            return Ok(LlmResponse::new(text, ResponseOrigin::Cached));
        }
        let text = self.client.complete(request)?;
        self.cache.put(request, &text)?;
        Ok(LlmResponse::new(text, ResponseOrigin::Live))
    }
}

#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub fixture_path: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub base_url: Option<String>,
    pub api_key_env: String,
    pub timeout: Duration,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            fixture_path: None,
            cache_dir: None,
            base_url: None,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout: Duration::from_secs(120),
        }
    }
}

impl BackendConfig {
    fn response_cache(&self) -> Result<ResponseCache, LlmError> {
        let dir = self
            .cache_dir
            .as_ref()
            .ok_or_else(|| LlmError::Config("a cache directory is required".into()))?;
        Ok(ResponseCache::new(dir.join("llm")))
    }

    fn fixture_path(&self) -> Result<&Path, LlmError> {
        self.fixture_path
            .as_deref()
            .ok_or_else(|| LlmError::Config("a fixture path is required".into()))
    }
}

pub type BackendRegistry = Registry<BackendConfig, Box<dyn ChatBackend>, LlmError>;

/// A JSON list is a playbook; a JSON object is a hash-keyed fixture map.
pub fn load_scripted(path: &Path) -> Result<Box<dyn ChatBackend>, LlmError> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('[') {
        Ok(Box::new(PlaybookBackend::from_file(path)?))
    } else {
        Ok(Box::new(ScriptedBackend::from_file(path)?))
    }
}

/// Built-in chat backends: `scripted` (fixture map or playbook), `cached`
/// and `live`.
pub fn backend_registry() -> BackendRegistry {
    let mut reg = BackendRegistry::new("llm mode");
    reg.register("scripted", |cfg| load_scripted(cfg.fixture_path()?));
    reg.register("cached", |cfg| Ok(Box::new(CachedBackend::new(cfg.response_cache()?))));
    reg.register("live", |cfg| {
        let base_url = cfg
            .base_url
            .as_deref()
            .ok_or_else(|| LlmError::Config("live mode requires a base URL".into()))?;
        let api_key = std::env::var(&cfg.api_key_env).ok();
        let client = OpenAiClient::new(base_url, api_key, cfg.timeout)?;
        Ok(Box::new(LiveBackend::new(client, cfg.response_cache()?)))
    });
    reg
}
