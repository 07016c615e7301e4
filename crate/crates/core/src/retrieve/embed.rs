use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::RetrieveError;
use crate::fsutil::atomic_write;

/// An L2-normalized dense vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f32>,
}

impl Embedding {
    /// Normalizes `values`; an all-zero or non-finite vector is rejected.
    pub fn normalized(mut values: Vec<f32>) -> Option<Self> {
        let norm = values.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        for v in &mut values {
            *v = (*v as f64 / norm) as f32;
        }
        Some(Self { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (*v as f64) * (*v as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Cosine similarity; both sides are unit vectors so this is a dot product.
    pub fn cosine(&self, other: &Embedding) -> f32 {
        let dot: f32 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot.clamp(-1.0, 1.0)
    }
}

pub trait Embedder: Send + Sync {
    /// Stable identifier; part of the embedding cache key.
    fn id(&self) -> String;

    fn embed(&self, text: &str) -> Result<Embedding, RetrieveError>;
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Character n-grams of the lower-cased, space-padded text hashed into a
/// fixed number of buckets. Fully deterministic and offline.
#[derive(Debug, Clone)]
pub struct HashedNgramEmbedder {
    dim: usize,
    min_n: usize,
    max_n: usize,
}

impl Default for HashedNgramEmbedder {
    fn default() -> Self {
        Self::new(1024, 3, 4)
    }
}

impl HashedNgramEmbedder {
    pub fn new(dim: usize, min_n: usize, max_n: usize) -> Self {
        assert!(dim > 0 && min_n > 0 && min_n <= max_n);
        Self { dim, min_n, max_n }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The padded character sequence n-grams are drawn from.
    pub fn prepare(text: &str) -> Vec<char> {
        let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        format!(" {} ", words.join(" ")).chars().collect()
    }
}

impl Embedder for HashedNgramEmbedder {
    fn id(&self) -> String {
        format!("hashed-ngram-d{}-n{}-{}", self.dim, self.min_n, self.max_n)
    }

    fn embed(&self, text: &str) -> Result<Embedding, RetrieveError> {
        if text.trim().is_empty() {
            return Err(RetrieveError::EmptyText);
        }
        let chars = Self::prepare(text);
        let mut values = vec![0f32; self.dim];
        let mut buf = String::new();
        for n in self.min_n..=self.max_n {
            for window in chars.windows(n) {
                buf.clear();
                buf.extend(window);
                let bucket = (fnv1a(buf.as_bytes()) % self.dim as u64) as usize;
                values[bucket] += 1.0;
            }
        }
        Embedding::normalized(values).ok_or(RetrieveError::EmptyText)
    }
}

/// Content-addressed on-disk vectors: file name is SHA-256 of
/// `backend-id \0 text`, body is a little-endian `u32` dim followed by
/// `dim` little-endian `f32` values.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn key(backend_id: &str, text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(backend_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.f32"))
    }

    pub fn encode(values: &[f32]) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + values.len() * 4);
        out.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Vec<f32>> {
        let dim = u32::from_le_bytes(bytes.get(..4)?.try_into().ok()?) as usize;
        let body = bytes.get(4..)?;
        if body.len() != dim * 4 {
            return None;
        }
        Some(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    }

    pub fn get(&self, backend_id: &str, text: &str) -> Option<Vec<f32>> {
        let bytes = fs::read(self.path(&Self::key(backend_id, text))).ok()?;
        Self::decode(&bytes)
    }

    pub fn put(&self, backend_id: &str, text: &str, values: &[f32]) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        atomic_write(&self.path(&Self::key(backend_id, text)), &Self::encode(values))
    }
}

/// Wraps another embedder with the on-disk cache.
pub struct CachingEmbedder {
    inner: Arc<dyn Embedder>,
    cache: EmbeddingCache,
}

impl CachingEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, cache: EmbeddingCache) -> Self {
        Self { inner, cache }
    }
}

impl Embedder for CachingEmbedder {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed(&self, text: &str) -> Result<Embedding, RetrieveError> {
        let id = self.inner.id();
        if let Some(values) = self.cache.get(&id, text) {
            if let Some(e) = Embedding::normalized(values) {
                return Ok(e);
            }
        }
        let embedding = self.inner.embed(text)?;
        if let Err(e) = self.cache.put(&id, text, embedding.values()) {
            log::warn!("embedding cache write failed: {e}");
        }
        Ok(embedding)
    }
}

/// OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbedder {
    base_url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>) -> Result<Self, RetrieveError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| RetrieveError::EmbedderUnavailable(e.to_string()))?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            client,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote:{}:{}", self.base_url, self.model)
    }

    fn embed(&self, text: &str) -> Result<Embedding, RetrieveError> {
        if text.trim().is_empty() {
            return Err(RetrieveError::EmptyText);
        }
        let unavailable = |e: String| RetrieveError::EmbedderUnavailable(e);
        let mut req = self
            .client
            .post(format!("{}/embeddings", self.base_url))
            .json(&serde_json::json!({ "model": self.model, "input": text }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(unavailable(format!("HTTP {status}")));
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| unavailable(e.to_string()))?;
        let values = body
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| unavailable("empty embedding response".into()))?;
        Embedding::normalized(values).ok_or_else(|| unavailable("zero embedding returned".into()))
    }
}
