use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::eval::RECALL_CUTOFFS;

pub const LLM_MODES: [&str; 3] = ["scripted", "cached", "live"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Models {
    #[serde(default = "default_decompose_model")]
    pub decompose: String,
    #[serde(default = "default_reason_model")]
    pub reason: String,
    #[serde(default = "default_reason_model")]
    pub aggregate: String,
}

fn default_decompose_model() -> String {
    "gpt-4o-mini".into()
}

fn default_reason_model() -> String {
    "deepseek-v3".into()
}

impl Default for Models {
    fn default() -> Self {
        Self {
            decompose: default_decompose_model(),
            reason: default_reason_model(),
            aggregate: default_reason_model(),
        }
    }
}

/// Endpoint settings for live chat and remote embeddings. Keys are read
/// from the named environment variable only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoint {
    pub base_url: Option<String>,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Embedding model name, for the remote embedder.
    pub model: Option<String>,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_timeout() -> u64 {
    120
}

impl Default for Endpoint {
    fn default() -> Self {
        Self {
            base_url: None,
            api_key_env: default_key_env(),
            timeout_secs: default_timeout(),
            model: None,
        }
    }
}

/// Everything a run depends on. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tkg_path: PathBuf,
    #[serde(default = "default_tkg_format")]
    pub tkg_format: String,
    pub dataset_path: PathBuf,
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    pub fixture_path: Option<PathBuf>,
    pub surface_forms_path: Option<PathBuf>,
    /// Extra or replacement prompt templates (JSON list).
    pub prompts_path: Option<PathBuf>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    #[serde(default = "default_llm_mode")]
    pub llm_mode: String,
    #[serde(default)]
    pub models: Models,
    #[serde(default)]
    pub temperature: f32,
    #[serde(default = "default_aggregation")]
    pub aggregation: String,
    #[serde(default)]
    pub third_source: bool,
    /// Flag (never drop) answers that contradict a date bound in the question.
    #[serde(default)]
    pub verify_temporal: bool,
    #[serde(default = "default_embedder")]
    pub embedder: String,
    #[serde(default = "default_backend")]
    pub index_backend: String,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub limit: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub strict_decompose: bool,
    #[serde(default = "default_true")]
    pub lenient_ingest: bool,
    #[serde(default = "default_cutoffs")]
    pub recall_cutoffs: Vec<usize>,
    /// When set, every served LLM response is written to this fixture file.
    pub record_fixtures: Option<PathBuf>,
    #[serde(default)]
    pub llm: Endpoint,
    #[serde(default)]
    pub embedding: Endpoint,
}

fn default_tkg_format() -> String {
    "tsv-quadruple".into()
}
fn default_work_dir() -> PathBuf {
    "work".into()
}
fn default_cache_dir() -> PathBuf {
    "cache".into()
}
fn default_top_k() -> usize {
    crate::retrieve::DEFAULT_TOP_K
}
fn default_max_depth() -> usize {
    crate::decompose::DEFAULT_MAX_DEPTH
}
fn default_llm_mode() -> String {
    "scripted".into()
}
fn default_aggregation() -> String {
    "rules".into()
}
fn default_embedder() -> String {
    "hashed-ngram".into()
}
fn default_backend() -> String {
    "exact".into()
}
fn default_parallelism() -> usize {
    8
}
fn default_true() -> bool {
    true
}
fn default_cutoffs() -> Vec<usize> {
    RECALL_CUTOFFS.to_vec()
}

impl RunConfig {
    /// A config with defaults everywhere except the two required inputs.
    pub fn new(tkg_path: impl Into<PathBuf>, dataset_path: impl Into<PathBuf>) -> Self {
        let text = format!(
            "tkg_path = {:?}\ndataset_path = {:?}\n",
            tkg_path.into().display().to_string(),
            dataset_path.into().display().to_string()
        );
        toml::from_str(&text).expect("minimal config parses")
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.tkg_path);
        fix(&mut self.dataset_path);
        fix(&mut self.work_dir);
        fix(&mut self.cache_dir);
        for p in [
            &mut self.fixture_path,
            &mut self.surface_forms_path,
            &mut self.prompts_path,
            &mut self.record_fixtures,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if !LLM_MODES.contains(&self.llm_mode.as_str()) {
            return bad(format!(
                "llm_mode must be one of {}, got {:?}",
                LLM_MODES.join(", "),
                self.llm_mode
            ));
        }
        if self.llm_mode == "scripted" && self.fixture_path.is_none() {
            return bad("scripted mode needs fixture_path".into());
        }
        if self.llm_mode == "live" && self.llm.base_url.is_none() {
            return bad("live mode needs llm.base_url".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} is out of range", self.temperature));
        }
        if self.recall_cutoffs.contains(&0) {
            return bad("recall cutoffs must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the effective config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
