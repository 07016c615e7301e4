use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embed::Embedding;
use super::RetrieveError;
use crate::registry::Registry;
use crate::store::FactId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexBackend {
    Exact,
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub fact_id: FactId,
    pub score: f32,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct IndexEntry {
    pub fact_id: FactId,
    pub embedding: Embedding,
}

/// Ordering for search candidates: higher score first, lower id on ties.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    score: f32,
    fact_id: FactId,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.fact_id.cmp(&self.fact_id))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the `k` best entries among `candidates`.
fn top_k<'a>(
    entries: &'a [IndexEntry],
    candidates: impl Iterator<Item = usize>,
    query: &Embedding,
    k: usize,
) -> Vec<RetrievalResult> {
    let mut heap: BinaryHeap<Reverse<Scored>> = BinaryHeap::with_capacity(k + 1);
    for i in candidates {
        let e: &'a IndexEntry = &entries[i];
        heap.push(Reverse(Scored {
            score: e.embedding.cosine(query),
            fact_id: e.fact_id,
        }));
        if heap.len() > k {
            heap.pop();
        }
    }
    let mut best: Vec<Scored> = heap.into_iter().map(|r| r.0).collect();
    best.sort_by(|a, b| b.cmp(a));
    best.into_iter()
        .enumerate()
        .map(|(i, s)| RetrievalResult {
            fact_id: s.fact_id,
            score: s.score,
            rank: i + 1,
        })
        .collect()
}

pub trait Searcher: Send + Sync {
    fn backend(&self) -> IndexBackend;

    fn search(&self, entries: &[IndexEntry], query: &Embedding, k: usize) -> Vec<RetrievalResult>;
}

/// Full scan over every entry.
#[derive(Debug, Default)]
pub struct ExactSearcher;

impl Searcher for ExactSearcher {
    fn backend(&self) -> IndexBackend {
        IndexBackend::Exact
    }

    fn search(&self, entries: &[IndexEntry], query: &Embedding, k: usize) -> Vec<RetrievalResult> {
        top_k(entries, 0..entries.len(), query, k)
    }
}

/// Random-hyperplane LSH with query-directed multi-probe. Every table is
/// probed at its own bucket and at the buckets one or two low-margin bit
/// flips away; entries collect votes (more for nearer buckets) and the
/// best-voted pool of `max(OVERSAMPLE * k, MIN_POOL)` is re-scored exactly.
/// A pool smaller than `k` falls back to a full scan.
pub struct LshSearcher {
    mean: Vec<f32>,
    planes: Vec<Vec<Vec<f32>>>,
    tables: Vec<HashMap<u32, Vec<usize>>>,
}

impl LshSearcher {
    pub const DEFAULT_TABLES: usize = 24;
    pub const DEFAULT_BITS: usize = 6;
    pub const OVERSAMPLE: usize = 10;
    pub const MIN_POOL: usize = 200;

    pub fn build(entries: &[IndexEntry], tables: usize, bits: usize, seed: u64) -> Result<Self, RetrieveError> {
        if entries.is_empty() {
            return Err(RetrieveError::EmptyCorpus);
        }
        assert!(bits > 0 && bits <= 32);
        let dim = entries[0].embedding.dim();
        let mut mean = vec![0f32; dim];
        for e in entries {
            for (m, v) in mean.iter_mut().zip(e.embedding.values()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= entries.len() as f32;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes: Vec<Vec<Vec<f32>>> = (0..tables)
            .map(|_| {
                (0..bits)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect())
                    .collect()
            })
            .collect();
        let mut searcher = Self {
            mean,
            planes,
            tables: vec![HashMap::new(); tables],
        };
        for (i, e) in entries.iter().enumerate() {
            for t in 0..tables {
                let code = searcher.code(&searcher.projections(t, e.embedding.values()));
                searcher.tables[t].entry(code).or_default().push(i);
            }
        }
        Ok(searcher)
    }

    fn projections(&self, table: usize, v: &[f32]) -> Vec<f32> {
        self.planes[table]
            .iter()
            .map(|plane| plane.iter().zip(v).zip(&self.mean).map(|((p, x), m)| p * (x - m)).sum())
            .collect()
    }

    fn code(&self, projections: &[f32]) -> u32 {
        projections
            .iter()
            .enumerate()
            .filter(|(_, p)| **p >= 0.0)
            .fold(0u32, |code, (b, _)| code | 1 << b)
    }

    /// (bucket, vote weight): the base bucket, single flips by ascending
    /// margin, then pairs among the four lowest-margin bits.
    fn probe_sequence(&self, projections: &[f32]) -> Vec<(u32, u32)> {
        let code = self.code(projections);
        let mut order: Vec<usize> = (0..projections.len()).collect();
        order.sort_by(|&a, &b| projections[a].abs().total_cmp(&projections[b].abs()).then(a.cmp(&b)));
        let mut probes = vec![(code, 4)];
        probes.extend(order.iter().map(|&b| (code ^ (1 << b), 2)));
        let close = &order[..order.len().min(4)];
        for (i, &a) in close.iter().enumerate() {
            for &b in &close[i + 1..] {
                probes.push((code ^ (1 << a) ^ (1 << b), 1));
            }
        }
        probes
    }
}

impl Searcher for LshSearcher {
    fn backend(&self) -> IndexBackend {
        IndexBackend::Approximate
    }

    fn search(&self, entries: &[IndexEntry], query: &Embedding, k: usize) -> Vec<RetrievalResult> {
        let target = (k * Self::OVERSAMPLE).max(Self::MIN_POOL).min(entries.len());
        let mut votes: HashMap<usize, u32> = HashMap::new();
        for (t, table) in self.tables.iter().enumerate() {
            for (code, weight) in self.probe_sequence(&self.projections(t, query.values())) {
                for &i in table.get(&code).into_iter().flatten() {
                    *votes.entry(i).or_default() += weight;
                }
            }
        }
        let mut pool: Vec<(usize, u32)> = votes.into_iter().collect();
        pool.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        pool.truncate(target);
        if pool.len() < k.min(entries.len()) {
            return top_k(entries, 0..entries.len(), query, k);
        }
        let candidates: BTreeSet<usize> = pool.into_iter().map(|(i, _)| i).collect();
        top_k(entries, candidates.into_iter(), query, k)
    }
}

pub type SearcherRegistry = Registry<Vec<IndexEntry>, Box<dyn Searcher>, RetrieveError>;

/// Built-in index backends: `exact` and `lsh`.
pub fn searcher_registry() -> SearcherRegistry {
    let mut reg = SearcherRegistry::new("index backend");
    reg.register("exact", |_| Ok(Box::new(ExactSearcher)));
    reg.register("lsh", |entries| {
        Ok(Box::new(LshSearcher::build(
            entries,
            LshSearcher::DEFAULT_TABLES,
            LshSearcher::DEFAULT_BITS,
            0x5eed,
        )?))
    });
    reg
}

/// Immutable set of (fact id, embedding) entries plus a search strategy.
pub struct VectorIndex {
    entries: Vec<IndexEntry>,
    dim: Option<usize>,
    searcher: Box<dyn Searcher>,
}

impl VectorIndex {
    pub fn new(entries: Vec<IndexEntry>, backend: &str) -> Result<Self, RetrieveError> {
        Self::with_registry(entries, backend, &searcher_registry())
    }

    pub fn with_registry(
        entries: Vec<IndexEntry>,
        backend: &str,
        registry: &SearcherRegistry,
    ) -> Result<Self, RetrieveError> {
        let dim = entries.first().map(|e| e.embedding.dim());
        if let Some(d) = dim {
            if let Some(bad) = entries.iter().find(|e| e.embedding.dim() != d) {
                return Err(RetrieveError::DimensionMismatch {
                    expected: d,
                    found: bad.embedding.dim(),
                });
            }
        }
        let searcher = registry.create(backend, &entries)?;
        Ok(Self { entries, dim, searcher })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn backend(&self) -> IndexBackend {
        self.searcher.backend()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn search(&self, query: &Embedding, k: usize) -> Result<Vec<RetrievalResult>, RetrieveError> {
        if k == 0 {
            return Err(RetrieveError::InvalidK);
        }
        if self.entries.is_empty() {
            return Ok(Vec::new());
        }
        if let Some(d) = self.dim {
            if query.dim() != d {
                return Err(RetrieveError::DimensionMismatch {
                    expected: d,
                    found: query.dim(),
                });
            }
        }
        Ok(self.searcher.search(&self.entries, query, k))
    }
}
