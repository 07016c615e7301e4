//! Dense retrieval over verbalized facts.

mod embed;
mod index;

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

pub use embed::{CachingEmbedder, Embedder, Embedding, EmbeddingCache, HashedNgramEmbedder, RemoteEmbedder};
pub use index::{
    searcher_registry, ExactSearcher, IndexBackend, IndexEntry, LshSearcher, RetrievalResult, Searcher,
    SearcherRegistry, VectorIndex,
};

use crate::registry::{Registry, UnknownStrategy};
use crate::store::FactId;
use crate::verbalize::VerbalizedFact;

/// Default number of facts handed to the reasoning step.
pub const DEFAULT_TOP_K: usize = 50;

#[derive(Debug, Error)]
pub enum RetrieveError {
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("approximate index requires a non-empty corpus")]
    EmptyCorpus,
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}

/// Settings consumed by the embedder factories.
#[derive(Debug, Clone, Default)]
pub struct EmbedderConfig {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

pub type EmbedderRegistry = Registry<EmbedderConfig, Arc<dyn Embedder>, RetrieveError>;

/// Built-in embedders: `hashed-ngram` (offline) and `remote`.
pub fn embedder_registry() -> EmbedderRegistry {
    let mut reg = EmbedderRegistry::new("embedder");
    reg.register("hashed-ngram", |_| Ok(Arc::new(HashedNgramEmbedder::default())));
    reg.register("remote", |cfg: &EmbedderConfig| {
        let base_url = cfg
            .base_url
            .as_deref()
            .ok_or_else(|| RetrieveError::EmbedderUnavailable("remote embedder needs a base URL".into()))?;
        let model = cfg.model.as_deref().unwrap_or("text-embedding-3-small");
        let api_key = cfg.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
        let remote: Arc<dyn Embedder> = Arc::new(RemoteEmbedder::new(base_url, model, api_key)?);
        Ok(match &cfg.cache_dir {
            Some(dir) => Arc::new(CachingEmbedder::new(
                remote,
                EmbeddingCache::new(dir.join("embeddings")),
            )),
            None => remote,
        })
    });
    reg
}

pub fn embed_text(embedder: &dyn Embedder, text: &str) -> Result<Embedding, RetrieveError> {
    embedder.embed(text)
}

/// Embeds every fact (in parallel) and builds an index with the named backend.
pub fn build_index(
    facts: &[VerbalizedFact],
    embedder: &dyn Embedder,
    backend: &str,
) -> Result<VectorIndex, RetrieveError> {
    let entries = facts
        .par_iter()
        .map(|f| {
            Ok(IndexEntry {
                fact_id: f.fact_id,
                embedding: embedder.embed(&f.text)?,
            })
        })
        .collect::<Result<Vec<_>, RetrieveError>>()?;
    VectorIndex::new(entries, backend)
}

/// Top-`k` facts by cosine similarity, ties broken by ascending fact id.
pub fn retrieve(
    question: &str,
    index: &VectorIndex,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<Vec<RetrievalResult>, RetrieveError> {
    if k == 0 {
        return Err(RetrieveError::InvalidK);
    }
    if index.is_empty() {
        return Ok(Vec::new());
    }
    index.search(&embedder.embed(question)?, k)
}

/// An embedder, an index over a corpus, and the corpus texts.
pub struct Retriever {
    embedder: Arc<dyn Embedder>,
    index: VectorIndex,
    facts: Vec<VerbalizedFact>,
}

impl Retriever {
    pub fn build(
        facts: Vec<VerbalizedFact>,
        embedder: Arc<dyn Embedder>,
        backend: &str,
    ) -> Result<Self, RetrieveError> {
        let index = build_index(&facts, embedder.as_ref(), backend)?;
        Ok(Self { embedder, index, facts })
    }

    pub fn retrieve(&self, question: &str, k: usize) -> Result<Vec<RetrievalResult>, RetrieveError> {
        retrieve(question, &self.index, self.embedder.as_ref(), k)
    }

    pub fn text(&self, fact_id: FactId) -> Option<&str> {
        self.facts
            .get(fact_id as usize)
            .filter(|f| f.fact_id == fact_id)
            .or_else(|| self.facts.iter().find(|f| f.fact_id == fact_id))
            .map(|f| f.text.as_str())
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }
}
