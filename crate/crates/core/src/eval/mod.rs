//! Hits@k, Recall@n and tree statistics, plus the text tables that report
//! them.

mod dataset;
mod table;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{dataset_to_json_lines, load_dataset, parse_dataset, AnswerType, DatasetItem};
pub use table::{
    context_table, efficiency_table, granularity_table, hits_table, recall_table, render_report, render_table,
};

use crate::decompose::{QueryTree, QuestionType};
use crate::retrieve::RetrievalResult;
use crate::solve::{Answer, AnswerSource, AnswerValue, SolvedTree};
use crate::store::{FactId, TkgStore};
use crate::time::{Granularity, TimeStamp};

pub const RECALL_CUTOFFS: [usize; 6] = [10, 20, 30, 40, 50, 60];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    EmptyRecordSet,
    #[error("recall is undefined without gold facts")]
    UndefinedRecall,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("dataset line {line_no}: {reason}")]
    BadDataset { line_no: usize, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Case-folded, trimmed, whitespace-collapsed, without square brackets,
/// quotes or trailing periods.
pub fn normalize(s: &str) -> String {
    let stripped: String = s
        .chars()
        .filter(|c| !matches!(c, '[' | ']' | '"' | '\'' | '`' | '\u{201c}' | '\u{201d}'))
        .collect();
    let collapsed = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches('.').trim().to_lowercase()
}

fn time_matches(pred: TimeStamp, gold: TimeStamp) -> bool {
    let g = pred.granularity().min(gold.granularity());
    pred.truncate(g) == gold.truncate(g)
}

fn text_matches(pred: &str, gold: &str) -> bool {
    match (TimeStamp::parse(pred.trim()), TimeStamp::parse(gold.trim())) {
        (Ok(p), Ok(g)) => time_matches(p, g),
        _ => normalize(pred) == normalize(gold),
    }
}

/// True iff the prediction equals some gold string after normalization.
/// Lists hit when any listed entity does; timestamps are compared at the
/// coarser of the two granularities.
pub fn match_answer(prediction: &Answer, gold: &[String]) -> bool {
    match &prediction.value {
        AnswerValue::Unknown | AnswerValue::Error => false,
        _ if !prediction.is_valid() => false,
        AnswerValue::Timestamp(t) => gold.iter().any(|g| match TimeStamp::parse(g.trim()) {
            Ok(gt) => time_matches(*t, gt),
            Err(_) => normalize(g) == t.to_string(),
        }),
        AnswerValue::Entity(e) => gold.iter().any(|g| text_matches(e, g)),
        AnswerValue::EntityTimeList(items) => items
            .iter()
            .any(|p| gold.iter().any(|g| normalize(g) == normalize(&p.entity))),
    }
}

/// Final answer, then the root's other distinct candidates, then entities
/// (or times) from the root's retrieved facts, up to `limit` entries.
pub fn rank_predictions(
    solved: &SolvedTree,
    store: &TkgStore,
    answer_type: AnswerType,
    time_level: Option<Granularity>,
    limit: usize,
) -> Vec<Answer> {
    let root = solved.root_trace();
    let mut seen = BTreeSet::new();
    let mut ranked = Vec::new();
    let mut push = |a: Answer, ranked: &mut Vec<Answer>| {
        if ranked.len() < limit && a.is_valid() && seen.insert(normalize(&a.render())) {
            ranked.push(Answer {
                chain: String::new(),
                ..a
            });
        }
    };
    push(root.final_answer.clone(), &mut ranked);
    for cand in [&root.child_answer, &root.ir_answer].into_iter().flatten() {
        push(cand.clone(), &mut ranked);
    }
    for &id in &root.retrieved_fact_ids {
        if ranked.len() >= limit {
            break;
        }
        let Some(fact) = store.fact(id) else { continue };
        match answer_type {
            AnswerType::Entity => {
                for e in [&fact.subject, &fact.object] {
                    push(
                        Answer::new(AnswerValue::Entity(e.clone()), AnswerSource::Ir, ""),
                        &mut ranked,
                    );
                }
            }
            AnswerType::Time => {
                let t = fact.time.anchor();
                let t = time_level.map_or(t, |g| t.truncate(g.min(t.granularity())));
                push(
                    Answer::new(AnswerValue::Timestamp(t), AnswerSource::Ir, ""),
                    &mut ranked,
                );
            }
        }
    }
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub question_id: String,
    pub qtype: QuestionType,
    pub answer_type: AnswerType,
    pub time_granularity: Option<Granularity>,
    pub predictions: Vec<Answer>,
    pub gold: Vec<String>,
    pub hit1: bool,
    pub hit10: bool,
    pub api_calls: u32,
    pub tree_depth: usize,
    pub tree_branch: f64,
}

impl EvalRecord {
    pub fn hit_at(&self, k: usize) -> bool {
        self.predictions.iter().take(k).any(|p| match_answer(p, &self.gold))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn build_record(
    item: &DatasetItem,
    qtype: QuestionType,
    solved: &SolvedTree,
    store: &TkgStore,
    api_calls: u32,
) -> EvalRecord {
    let predictions = rank_predictions(solved, store, item.answer_type, item.time_level, 10);
    let mut record = EvalRecord {
        question_id: item.question_id.clone(),
        qtype,
        answer_type: item.answer_type,
        time_granularity: item.time_level,
        predictions,
        gold: item.answers.clone(),
        hit1: false,
        hit10: false,
        api_calls,
        tree_depth: solved.tree.depth(),
        tree_branch: solved.tree.branch(),
    };
    record.hit1 = record.hit_at(1);
    record.hit10 = record.hit_at(10);
    record
}

pub fn hits_at_k(records: &[EvalRecord], k: usize) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecordSet);
    }
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    let hits = records.iter().filter(|r| r.hit_at(k)).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Share of the gold facts found among `retrieved`.
pub fn recall_at_n(retrieved: &[RetrievalResult], gold_fact_ids: &BTreeSet<FactId>) -> Result<f64, EvalError> {
    if gold_fact_ids.is_empty() {
        return Err(EvalError::UndefinedRecall);
    }
    let found: BTreeSet<FactId> = retrieved
        .iter()
        .map(|r| r.fact_id)
        .filter(|id| gold_fact_ids.contains(id))
        .collect();
    Ok(found.len() as f64 / gold_fact_ids.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub avg_depth: f64,
    pub avg_branch: f64,
    pub avg_api_calls: f64,
}

/// Averages over trees of edge-count depth, mean children per inner node,
/// and LLM calls.
pub fn tree_stats<'a>(trees: impl IntoIterator<Item = (&'a QueryTree, u32)>) -> Result<TreeStats, EvalError> {
    let (mut n, mut depth, mut branch, mut calls) = (0usize, 0.0, 0.0, 0.0);
    for (tree, api_calls) in trees {
        n += 1;
        depth += tree.depth() as f64;
        branch += tree.branch();
        calls += f64::from(api_calls);
    }
    if n == 0 {
        return Err(EvalError::EmptyRecordSet);
    }
    let n = n as f64;
    Ok(TreeStats {
        avg_depth: depth / n,
        avg_branch: branch / n,
        avg_api_calls: calls / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallPoint {
    pub n: usize,
    pub recall: f64,
    /// Only known for the context length the run actually used.
    pub hits1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    pub points: Vec<RecallPoint>,
    pub questions: usize,
    /// Questions left out for lack of gold facts.
    pub excluded: usize,
}

/// Mean Recall@n per cutoff. `ranked` holds each question's retrieval list
/// (at least as long as the largest cutoff) and its gold fact ids.
pub fn recall_curve(
    ranked: &[(Vec<RetrievalResult>, BTreeSet<FactId>)],
    cutoffs: &[usize],
) -> Result<RecallCurve, EvalError> {
    let usable: Vec<_> = ranked.iter().filter(|(_, g)| !g.is_empty()).collect();
    if usable.is_empty() {
        return Err(EvalError::UndefinedRecall);
    }
    let mut points = Vec::new();
    for &n in cutoffs {
        let mut sum = 0.0;
        for (hits, gold) in &usable {
            sum += recall_at_n(&hits[..n.min(hits.len())], gold)?;
        }
        points.push(RecallPoint {
            n,
            recall: sum / usable.len() as f64,
            hits1: None,
        });
    }
    Ok(RecallCurve {
        points,
        questions: usable.len(),
        excluded: ranked.len() - usable.len(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub count: usize,
    pub hits1: f64,
    pub hits10: f64,
}

fn breakdown<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> Breakdown {
    let (mut count, mut h1, mut h10) = (0usize, 0usize, 0usize);
    for r in records {
        count += 1;
        h1 += usize::from(r.hit1);
        h10 += usize::from(r.hit10);
    }
    if count == 0 {
        return Breakdown::default();
    }
    Breakdown {
        count,
        hits1: h1 as f64 / count as f64,
        hits10: h10 as f64 / count as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub overall: Breakdown,
    pub by_category: BTreeMap<String, Breakdown>,
    pub by_complexity: BTreeMap<String, Breakdown>,
    pub by_answer_type: BTreeMap<String, Breakdown>,
    /// Keyed `category/granularity`, e.g. `equal/day`.
    pub by_granularity: BTreeMap<String, Breakdown>,
    pub tree: TreeStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<RecallCurve>,
}

pub fn summarize(records: &[EvalRecord], recall: Option<RecallCurve>) -> Result<EvalSummary, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecordSet);
    }
    let group = |key: &dyn Fn(&EvalRecord) -> Option<String>| {
        let mut keys = BTreeSet::new();
        for r in records {
            if let Some(k) = key(r) {
                keys.insert(k);
            }
        }
        keys.into_iter()
            .map(|k| {
                let b = breakdown(records.iter().filter(|r| key(r).as_deref() == Some(k.as_str())));
                (k, b)
            })
            .collect::<BTreeMap<_, _>>()
    };
    let tree = {
        let (n, d, b, c) = records.iter().fold((0.0, 0.0, 0.0, 0.0), |(n, d, b, c), r| {
            (
                n + 1.0,
                d + r.tree_depth as f64,
                b + r.tree_branch,
                c + f64::from(r.api_calls),
            )
        });
        TreeStats {
            avg_depth: d / n,
            avg_branch: b / n,
            avg_api_calls: c / n,
        }
    };
    Ok(EvalSummary {
        overall: breakdown(records),
        by_category: group(&|r| Some(r.qtype.category.label().to_string())),
        by_complexity: group(&|r| Some(r.qtype.complexity.label().to_string())),
        by_answer_type: group(&|r| Some(r.answer_type.label().to_string())),
        by_granularity: group(&|r| {
            r.time_granularity
                .map(|g| format!("{}/{}", r.qtype.category.label(), granularity_label(g)))
        }),
        tree,
        recall,
    })
}

pub(crate) fn granularity_label(g: Granularity) -> &'static str {
    match g {
        Granularity::Day => "day",
        Granularity::Month => "month",
        Granularity::Year => "year",
    }
}
