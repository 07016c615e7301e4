use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LlmError, LlmRequest, RequestLabel};
use crate::fsutil::atomic_write;

/// A scripted response: plain text, or `{"error": "..."}` to make the call fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureValue {
    Text(String),
    Error { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureAudit {
    pub hash: String,
    pub stage: String,
    pub question: String,
}

/// `{request-hash -> response}` map plus the question each entry came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixtureSet {
    pub responses: BTreeMap<String, FixtureValue>,
    pub audit: BTreeMap<String, RequestLabel>,
}

impl FixtureSet {
    pub fn insert(&mut self, request: &LlmRequest, value: FixtureValue) {
        let hash = request.hash();
        self.audit.insert(hash.clone(), request.label.clone());
        self.responses.insert(hash, value);
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("audit.jsonl")
    }

    pub fn load(path: &Path) -> Result<BTreeMap<String, FixtureValue>, LlmError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LlmError::BadFixture {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Reads a fixture file together with its sidecar, if there is one.
    pub fn load_with_audit(path: &Path) -> Result<Self, LlmError> {
        let responses = Self::load(path)?;
        let mut audit = BTreeMap::new();
        if let Ok(text) = fs::read_to_string(Self::sidecar_path(path)) {
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let row: FixtureAudit = serde_json::from_str(line).map_err(|e| LlmError::BadFixture {
                    path: Self::sidecar_path(path).display().to_string(),
                    message: e.to_string(),
                })?;
                audit.insert(
                    row.hash,
                    RequestLabel {
                        stage: row.stage,
                        question: row.question,
                    },
                );
            }
        }
        Ok(Self { responses, audit })
    }

    /// Adds entries from `other`, keeping existing ones on conflict.
    pub fn merge(&mut self, other: FixtureSet) {
        for (k, v) in other.responses {
            self.responses.entry(k).or_insert(v);
        }
        for (k, v) in other.audit {
            self.audit.entry(k).or_insert(v);
        }
    }

    /// Writes the fixture map and a JSON-lines sidecar listing the stage and
    /// question behind each hash. Returns the sidecar path.
    pub fn save(&self, path: &Path) -> Result<PathBuf, LlmError> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let mut body = serde_json::to_string_pretty(&self.responses).expect("fixtures serialize");
        body.push('\n');
        atomic_write(path, body.as_bytes())?;
        let mut audit = String::new();
        for (hash, label) in &self.audit {
            let row = FixtureAudit {
                hash: hash.clone(),
                stage: label.stage.clone(),
                question: label.question.clone(),
            };
            audit.push_str(&serde_json::to_string(&row).expect("audit serializes"));
            audit.push('\n');
        }
        let sidecar = Self::sidecar_path(path);
        atomic_write(&sidecar, audit.as_bytes())?;
        Ok(sidecar)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request: LlmRequest,
    response: String,
}

/// One JSON file per request hash; writes go through a temp file and rename.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn get(&self, request: &LlmRequest) -> Option<String> {
        let text = fs::read_to_string(self.path(&request.hash())).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        Some(entry.response)
    }

    pub fn put(&self, request: &LlmRequest, response: &str) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let entry = CacheEntry {
            request: request.clone(),
            response: response.to_string(),
        };
        let body = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        atomic_write(&self.path(&request.hash()), &body)
    }
}
