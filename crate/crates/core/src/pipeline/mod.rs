//! End-to-end stages over a run config: ingest, index, decompose, solve and
//! eval. Each stage writes its artifacts under `work_dir` and the later
//! stages read them back, so stages can be rerun on their own.

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{Endpoint, Models, RunConfig, LLM_MODES};

use crate::aggregate::{aggregator_registry, Aggregator, AggregatorConfig, AggregatorError};
use crate::decompose::{classify_question, decompose, DecomposeConfig, DecomposeError, QueryTree, QuestionType};
use crate::eval::{
    build_record, load_dataset, recall_curve, render_report, summarize, tree_stats, DatasetItem, EvalError, EvalRecord,
    EvalSummary, TreeStats,
};
use crate::fsutil::atomic_write;
use crate::llm::{backend_registry, BackendConfig, Gateway, LlmError, PromptLibrary};
use crate::retrieve::{embedder_registry, EmbedderConfig, RetrieveError, Retriever};
use crate::solve::{SolveError, SolvedTree, Solver, SolverConfig};
use crate::store::{load_tkg, parse_tkg, LoadReport, StoreError, TkgFormat, TkgStore};
use crate::verbalize::Verbalizer;

pub const FACTS_FILE: &str = "facts.jsonl";
pub const INGEST_REPORT_FILE: &str = "ingest.json";
pub const INDEX_FILE: &str = "index.json";
pub const TREES_FILE: &str = "trees.jsonl";
pub const SOLVED_FILE: &str = "solved.jsonl";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const EVAL_TEXT_FILE: &str = "eval.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage} needs {path}; run that stage first")]
    MissingInput { stage: &'static str, path: String },
    #[error("bad artifact {path} line {line_no}: {reason}")]
    BadArtifact {
        path: String,
        line_no: usize,
        reason: String,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Aggregator(#[from] AggregatorError),
    #[error("decomposing {question_id}: {source}")]
    Decompose {
        question_id: String,
        #[source]
        source: DecomposeError,
    },
    #[error("solving {question_id}: {source}")]
    Solve {
        question_id: String,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl PipelineError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Io { .. } => "io",
            PipelineError::MissingInput { .. } => "missing_input",
            PipelineError::BadArtifact { .. } => "bad_artifact",
            PipelineError::Store(_) => "store",
            PipelineError::Retrieve(_) => "retrieve",
            PipelineError::Llm(e)
            | PipelineError::Decompose {
                source: DecomposeError::Llm(e),
                ..
            } => llm_kind(e),
            PipelineError::Solve {
                source: SolveError::Llm(e),
                ..
            } => llm_kind(e),
            PipelineError::Aggregator(_) => "config",
            PipelineError::Decompose { .. } => "decompose",
            PipelineError::Solve { .. } => "solve",
            PipelineError::Eval(EvalError::EmptyRecordSet) => "empty_record_set",
            PipelineError::Eval(_) => "eval",
            PipelineError::Pool(_) => "internal",
        }
    }
}

fn llm_kind(e: &LlmError) -> &'static str {
    match e {
        LlmError::FixtureMiss { .. } => "fixture_miss",
        LlmError::CacheMiss { .. } => "cache_miss",
        _ => "llm",
    }
}

fn is_replay_miss(e: &LlmError) -> bool {
    matches!(e, LlmError::FixtureMiss { .. } | LlmError::CacheMiss { .. })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    atomic_write(path, bytes).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row).expect("artifact serializes"));
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Vec<T>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput {
            stage,
            path: path.display().to_string(),
        });
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| PipelineError::BadArtifact {
                path: path.display().to_string(),
                line_no: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// One decomposed question, as stored in `trees.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub question_id: String,
    pub question: String,
    pub qtype: QuestionType,
    pub gold: Vec<String>,
    pub tree: QueryTree,
    pub decompose_calls: u32,
    /// Why the tree is a single-node fallback, when it is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One solved question, as stored in `solved.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedRecord {
    pub question_id: String,
    pub question: String,
    pub qtype: QuestionType,
    pub answer: String,
    pub gold: Vec<String>,
    /// Decomposition plus solving calls.
    pub api_calls: u32,
    pub solved: SolvedTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub source: String,
    pub facts: usize,
    pub entities: usize,
    pub predicates: usize,
    pub report: LoadReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub embedder: String,
    pub backend: String,
    pub facts: usize,
    pub dim: Option<usize>,
    pub corpus_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// The last stage that wrote this manifest.
    pub stage: String,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub questions: usize,
    pub llm_calls: u64,
}

/// Runs stages for one config.
pub struct Pipeline {
    config: RunConfig,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.config.work_dir.join(name)
    }

    fn format(&self) -> Result<TkgFormat, PipelineError> {
        Ok(self.config.tkg_format.parse()?)
    }

    /// Parses the corpus and writes the normalized fact list.
    pub fn ingest(&self) -> Result<IngestSummary, PipelineError> {
        let (store, report) = load_tkg(&self.config.tkg_path, self.format()?, self.config.lenient_ingest)?;
        write_file(&self.artifact(FACTS_FILE), store.to_json_lines().as_bytes())?;
        let summary = IngestSummary {
            source: self.config.tkg_path.display().to_string(),
            facts: store.len(),
            entities: store.entities().len(),
            predicates: store.predicates().len(),
            report,
        };
        write_json(&self.artifact(INGEST_REPORT_FILE), &summary)?;
        Ok(summary)
    }

    /// The ingested facts if present, otherwise the corpus parsed afresh.
    pub fn load_store(&self) -> Result<TkgStore, PipelineError> {
        let facts = self.artifact(FACTS_FILE);
        if facts.exists() {
            let text = fs::read_to_string(&facts).map_err(io_err(&facts))?;
            return Ok(parse_tkg(&text, TkgFormat::JsonLines, false)?.0);
        }
        Ok(load_tkg(&self.config.tkg_path, self.format()?, self.config.lenient_ingest)?.0)
    }

    pub fn verbalizer(&self) -> Result<Verbalizer, PipelineError> {
        Ok(match &self.config.surface_forms_path {
            Some(p) => Verbalizer::from_surface_form_file(p)?,
            None => Verbalizer::new(),
        })
    }

    pub fn build_retriever(&self, store: &TkgStore) -> Result<Retriever, PipelineError> {
        let cfg = EmbedderConfig {
            base_url: self.config.embedding.base_url.clone(),
            model: self.config.embedding.model.clone(),
            api_key_env: Some(self.config.embedding.api_key_env.clone()),
            cache_dir: Some(self.config.cache_dir.clone()),
        };
        let embedder = embedder_registry().create(&self.config.embedder, &cfg)?;
        let facts = self.verbalizer()?.verbalize_store(store);
        Ok(Retriever::build(facts, embedder, &self.config.index_backend)?)
    }

    pub fn index(&self) -> Result<IndexSummary, PipelineError> {
        let store = self.load_store()?;
        let retriever = self.build_retriever(&store)?;
        let summary = IndexSummary {
            embedder: self.config.embedder.clone(),
            backend: self.config.index_backend.clone(),
            facts: retriever.index().len(),
            dim: retriever.index().dim(),
            corpus_sha256: hex::encode(Sha256::digest(store.to_json_lines().as_bytes())),
        };
        write_json(&self.artifact(INDEX_FILE), &summary)?;
        Ok(summary)
    }

    /// Dataset questions after `limit` and `seed` sampling. With a seed the
    /// sample is random but kept in file order.
    pub fn questions(&self) -> Result<Vec<DatasetItem>, PipelineError> {
        let items = load_dataset(&self.config.dataset_path)?;
        let Some(limit) = self.config.limit else {
            return Ok(items);
        };
        if limit >= items.len() {
            return Ok(items);
        }
        Ok(match self.config.seed {
            None => items.into_iter().take(limit).collect(),
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut keep = rand::seq::index::sample(&mut rng, items.len(), limit).into_vec();
                keep.sort_unstable();
                keep.into_iter().map(|i| items[i].clone()).collect()
            }
        })
    }

    pub fn prompts(&self) -> Result<PromptLibrary, PipelineError> {
        let mut lib = PromptLibrary::builtin();
        if let Some(p) = &self.config.prompts_path {
            lib.extend_from_file(p)?;
        }
        Ok(lib)
    }

    pub fn gateway(&self) -> Result<Gateway, PipelineError> {
        let cfg = BackendConfig {
            fixture_path: self.config.fixture_path.clone(),
            cache_dir: Some(self.config.cache_dir.clone()),
            base_url: self.config.llm.base_url.clone(),
            api_key_env: self.config.llm.api_key_env.clone(),
            timeout: Duration::from_secs(self.config.llm.timeout_secs),
        };
        let backend = backend_registry().create(&self.config.llm_mode, &cfg)?;
        let gateway = Gateway::new(backend).with_parallelism(self.config.parallelism);
        Ok(if self.config.record_fixtures.is_some() {
            gateway.recording()
        } else {
            gateway
        })
    }

    /// Writes whatever the gateway recorded, when recording is on.
    pub fn save_recording(&self, gateway: &Gateway) -> Result<(), PipelineError> {
        if let Some(path) = &self.config.record_fixtures {
            gateway.save_recording(path)?;
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.parallelism)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))
    }

    /// Decomposes every question into a tree. A replay miss aborts the stage.
    /// Other failures fall back to a single-node tree unless decomposition
    /// is strict.
    pub fn decompose(&self, gateway: &Gateway) -> Result<Vec<TreeRecord>, PipelineError> {
        let items = self.questions()?;
        let prompts = self.prompts()?;
        let cfg = DecomposeConfig {
            model_id: self.config.models.decompose.clone(),
            temperature: self.config.temperature,
            max_depth: self.config.max_depth,
            strict: self.config.strict_decompose,
        };
        let records = self.pool()?.install(|| {
            items
                .par_iter()
                .map(|item| {
                    let qtype = classify_question(&item.question, item.qtype.as_deref());
                    let (tree, calls, note) = match decompose(&item.question, qtype, gateway, &prompts, &cfg) {
                        Ok(d) => (d.tree, d.llm_calls, d.fallback),
                        Err(DecomposeError::Llm(e)) if is_replay_miss(&e) => {
                            return Err(PipelineError::Decompose {
                                question_id: item.question_id.clone(),
                                source: DecomposeError::Llm(e),
                            })
                        }
                        Err(e) if cfg.strict => {
                            return Err(PipelineError::Decompose {
                                question_id: item.question_id.clone(),
                                source: e,
                            })
                        }
                        Err(e) => {
                            log::warn!("{}: decomposition failed, answering directly: {e}", item.question_id);
                            let root = crate::solve::standardize_time(&item.question);
                            (QueryTree::leaf_only(&root, qtype), 1, Some(e.to_string()))
                        }
                    };
                    Ok(TreeRecord {
                        question_id: item.question_id.clone(),
                        question: item.question.clone(),
                        qtype,
                        gold: item.answers.clone(),
                        tree: tree.with_gold(item.answers.first().cloned()),
                        decompose_calls: calls,
                        note,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })?;
        write_jsonl(&self.artifact(TREES_FILE), &records)?;
        Ok(records)
    }

    fn aggregator(&self, prompts: Arc<PromptLibrary>) -> Result<Arc<dyn Aggregator>, PipelineError> {
        let cfg = AggregatorConfig {
            model_id: self.config.models.aggregate.clone(),
            temperature: self.config.temperature,
            prompts,
        };
        Ok(aggregator_registry().create(&self.config.aggregation, &cfg)?)
    }

    /// Solves every tree from `trees.jsonl`.
    pub fn solve(&self, gateway: &Gateway) -> Result<Vec<SolvedRecord>, PipelineError> {
        let trees: Vec<TreeRecord> = read_jsonl(&self.artifact(TREES_FILE), "solve")?;
        let store = self.load_store()?;
        let retriever = self.build_retriever(&store)?;
        let prompts = Arc::new(self.prompts()?);
        let aggregator = self.aggregator(prompts.clone())?;
        let cfg = SolverConfig {
            model_id: self.config.models.reason.clone(),
            temperature: self.config.temperature,
            top_k: self.config.top_k,
            max_depth: self.config.max_depth,
            third_source: self.config.third_source,
            verify_temporal: self.config.verify_temporal,
        };
        let solver = Solver {
            retriever: &retriever,
            gateway,
            prompts: &prompts,
            aggregator: aggregator.as_ref(),
            config: &cfg,
        };
        let records = self.pool()?.install(|| {
            trees
                .par_iter()
                .map(|t| {
                    let solved = solver.solve_tree(&t.tree).map_err(|source| PipelineError::Solve {
                        question_id: t.question_id.clone(),
                        source,
                    })?;
                    Ok::<_, PipelineError>(SolvedRecord {
                        question_id: t.question_id.clone(),
                        question: t.question.clone(),
                        qtype: t.qtype,
                        answer: solved.final_answer().render(),
                        gold: t.gold.clone(),
                        api_calls: t.decompose_calls + solved.llm_calls(),
                        solved,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })?;
        write_jsonl(&self.artifact(SOLVED_FILE), &records)?;
        Ok(records)
    }

    pub fn load_solved(&self) -> Result<Vec<SolvedRecord>, PipelineError> {
        read_jsonl(&self.artifact(SOLVED_FILE), "eval")
    }

    /// Scores `solved.jsonl` against the dataset. Recall@n is measured by
    /// retrieving again for every question that lists gold facts.
    pub fn eval(&self) -> Result<EvalSummary, PipelineError> {
        let solved = self.load_solved()?;
        if solved.is_empty() {
            return Err(EvalError::EmptyRecordSet.into());
        }
        let items: BTreeMap<String, DatasetItem> = load_dataset(&self.config.dataset_path)?
            .into_iter()
            .map(|i| (i.question_id.clone(), i))
            .collect();
        let store = self.load_store()?;
        let mut records: Vec<EvalRecord> = Vec::with_capacity(solved.len());
        for s in &solved {
            let item = items.get(&s.question_id).ok_or_else(|| PipelineError::BadArtifact {
                path: self.artifact(SOLVED_FILE).display().to_string(),
                line_no: records.len() + 1,
                reason: format!("question {} is not in the dataset", s.question_id),
            })?;
            records.push(build_record(item, s.qtype, &s.solved, &store, s.api_calls));
        }
        let recall = self.recall(&solved, &items, &store)?;
        let mut summary = summarize(&records, recall)?;
        if let Some(curve) = summary.recall.as_mut() {
            for p in curve.points.iter_mut().filter(|p| p.n == self.config.top_k) {
                p.hits1 = Some(summary.overall.hits1);
            }
        }
        write_jsonl(&self.artifact(RECORDS_FILE), &records)?;
        write_json(&self.artifact(EVAL_JSON_FILE), &summary)?;
        write_file(&self.artifact(EVAL_TEXT_FILE), render_report(&summary).as_bytes())?;
        Ok(summary)
    }

    fn recall(
        &self,
        solved: &[SolvedRecord],
        items: &BTreeMap<String, DatasetItem>,
        store: &TkgStore,
    ) -> Result<Option<crate::eval::RecallCurve>, PipelineError> {
        let with_gold: Vec<(&SolvedRecord, BTreeSet<_>)> = solved
            .iter()
            .filter_map(|s| {
                let gold = items.get(&s.question_id)?.gold_fact_ids.as_ref()?;
                Some((s, gold.iter().copied().collect::<BTreeSet<_>>()))
            })
            .filter(|(_, g)| !g.is_empty())
            .collect();
        if with_gold.is_empty() || self.config.recall_cutoffs.is_empty() {
            return Ok(None);
        }
        let retriever = self.build_retriever(store)?;
        let depth = self
            .config
            .recall_cutoffs
            .iter()
            .copied()
            .max()
            .unwrap_or(1)
            .max(self.config.top_k);
        let ranked = with_gold
            .into_par_iter()
            .map(|(s, gold)| Ok((retriever.retrieve(&s.solved.root_trace().question, depth)?, gold)))
            .collect::<Result<Vec<_>, RetrieveError>>()?;
        Ok(Some(recall_curve(&ranked, &self.config.recall_cutoffs)?))
    }

    /// Tree shape and call averages over `solved.jsonl`.
    pub fn stats(&self) -> Result<TreeStats, PipelineError> {
        let solved = self.load_solved()?;
        Ok(tree_stats(solved.iter().map(|s| (&s.solved.tree, s.api_calls)))?)
    }

    /// Hashes of the config, inputs and produced artifacts. Written without
    /// timestamps so that identical runs give identical manifests.
    pub fn write_manifest(&self, stage: &str, questions: usize, llm_calls: u64) -> Result<Manifest, PipelineError> {
        let mut inputs = BTreeMap::new();
        inputs.insert("tkg".to_string(), sha256_file(&self.config.tkg_path)?);
        inputs.insert("dataset".to_string(), sha256_file(&self.config.dataset_path)?);
        for (name, path) in [
            ("fixtures", &self.config.fixture_path),
            ("surface_forms", &self.config.surface_forms_path),
            ("prompts", &self.config.prompts_path),
        ] {
            if let Some(p) = path.as_ref().filter(|p| p.exists()) {
                inputs.insert(name.to_string(), sha256_file(p)?);
            }
        }
        let mut outputs = BTreeMap::new();
        for name in [
            FACTS_FILE,
            INDEX_FILE,
            TREES_FILE,
            SOLVED_FILE,
            RECORDS_FILE,
            EVAL_JSON_FILE,
            EVAL_TEXT_FILE,
        ] {
            let p = self.artifact(name);
            if p.exists() {
                outputs.insert(name.to_string(), sha256_file(&p)?);
            }
        }
        let manifest = Manifest {
            stage: stage.to_string(),
            config_sha256: self.config.hash(),
            inputs,
            outputs,
            questions,
            llm_calls,
        };
        write_json(&self.artifact(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }

    /// All stages in order with one shared gateway.
    pub fn run(&self) -> Result<RunOutcome, PipelineError> {
        self.ingest()?;
        self.index()?;
        let gateway = self.gateway()?;
        let result = self.decompose(&gateway).and_then(|_| self.solve(&gateway));
        self.save_recording(&gateway)?;
        let solved = result?;
        let summary = self.eval()?;
        let manifest = self.write_manifest("run", solved.len(), gateway.calls())?;
        Ok(RunOutcome {
            summary,
            manifest,
            llm_calls: gateway.calls(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: EvalSummary,
    pub manifest: Manifest,
    pub llm_calls: u64,
}
