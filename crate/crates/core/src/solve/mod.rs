//! Bottom-up resolution of a decomposition tree against the fact index.

mod answer;
mod standardize;
mod verify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answer::{
    parse_answer, parse_answer_value, render_value, Answer, AnswerSource, AnswerValue, EntityTime, ANSWER_ANCHOR,
};
pub use standardize::{replace_placeholders, standardize_time, PlaceholderError};
pub use verify::temporal_violations;

use crate::aggregate::{Aggregator, CandidateSet};
use crate::decompose::{placeholder_refs, DecompositionNode, QueryTree};
use crate::llm::{template_ids, Gateway, LlmError, LlmRequest, PromptInput, PromptLibrary};
use crate::retrieve::{RetrieveError, Retriever, DEFAULT_TOP_K};
use crate::store::FactId;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solving recursed past depth {max}")]
    DepthExceeded { max: usize },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Placeholder(#[from] PlaceholderError),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub model_id: String,
    pub temperature: f32,
    /// Facts handed to each reasoning call.
    pub top_k: usize,
    pub max_depth: usize,
    /// Ask a third opinion (source C) at every inner node.
    pub third_source: bool,
    /// Record answers that contradict an explicit date bound in their question.
    pub verify_temporal: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            model_id: "deepseek-v3".into(),
            temperature: 0.0,
            top_k: DEFAULT_TOP_K,
            max_depth: crate::decompose::DEFAULT_MAX_DEPTH,
            third_source: false,
            verify_temporal: false,
        }
    }
}

/// Everything recorded while solving one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub node_idx: usize,
    /// Completion order within the tree; children always finish first.
    pub seq: usize,
    /// The question as actually asked, after substitution and standardization.
    pub question: String,
    pub retrieved_fact_ids: Vec<FactId>,
    /// Context lines shown to the model for this node's own answer.
    pub facts: Vec<String>,
    #[serde(rename = "IR_answer")]
    pub ir_answer: Option<Answer>,
    pub child_answer: Option<Answer>,
    #[serde(rename = "answer")]
    pub final_answer: Answer,
    pub llm_calls: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedTree {
    pub tree: QueryTree,
    /// Indexed by node idx.
    pub traces: Vec<SolveTrace>,
}

impl SolvedTree {
    pub fn root_trace(&self) -> &SolveTrace {
        &self.traces[self.tree.root_idx]
    }

    pub fn final_answer(&self) -> &Answer {
        &self.root_trace().final_answer
    }

    pub fn llm_calls(&self) -> u32 {
        self.traces.iter().map(|t| t.llm_calls).sum()
    }
}

pub struct Solver<'a> {
    pub retriever: &'a Retriever,
    pub gateway: &'a Gateway,
    pub prompts: &'a PromptLibrary,
    pub aggregator: &'a dyn Aggregator,
    pub config: &'a SolverConfig,
}

struct Progress {
    traces: Vec<Option<SolveTrace>>,
    seq: usize,
}

struct Reasoned {
    answer: Answer,
    calls: u32,
}

impl Solver<'_> {
    pub fn solve_tree(&self, tree: &QueryTree) -> Result<SolvedTree, SolveError> {
        tree.validate().map_err(|e| SolveError::InvalidTree(e.to_string()))?;
        let mut progress = Progress {
            traces: vec![None; tree.len()],
            seq: 0,
        };
        let root = tree.root();
        self.solve_node(tree, root, root.question_text.clone(), None, 0, &mut progress)?;
        let traces = progress
            .traces
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| SolveError::InvalidTree(format!("node {i} was never solved"))))
            .collect::<Result<_, _>>()?;
        Ok(SolvedTree {
            tree: tree.clone(),
            traces,
        })
    }

    /// `prev_sibling` is the answer of the sibling solved just before this
    /// node, if any.
    fn solve_node(
        &self,
        tree: &QueryTree,
        node: &DecompositionNode,
        question: String,
        prev_sibling: Option<&Answer>,
        depth: usize,
        progress: &mut Progress,
    ) -> Result<Answer, SolveError> {
        if depth > self.config.max_depth {
            return Err(SolveError::DepthExceeded {
                max: self.config.max_depth,
            });
        }
        let trace = if node.is_leaf() {
            self.solve_leaf(node, question, prev_sibling)?
        } else {
            self.solve_inner(tree, node, question, depth, progress)?
        };
        let answer = trace.final_answer.clone();
        let violations = if self.config.verify_temporal {
            temporal_violations(&trace.question, &answer)
        } else {
            Vec::new()
        };
        progress.traces[node.idx] = Some(SolveTrace {
            seq: progress.seq,
            violations,
            ..trace
        });
        progress.seq += 1;
        Ok(answer)
    }

    fn solve_leaf(
        &self,
        node: &DecompositionNode,
        question: String,
        prev_sibling: Option<&Answer>,
    ) -> Result<SolveTrace, SolveError> {
        // A self-contained follow-up ("who was the last one among them?")
        // selects from the previous sibling's list instead of the index.
        let follow_up = prev_sibling.filter(|a| {
            placeholder_refs(&node.question_text).is_empty()
                && matches!(a.value, AnswerValue::EntityTimeList(_))
                && a.is_valid()
        });
        let (retrieved_fact_ids, facts, reasoned) = match follow_up {
            Some(list) => {
                let facts = list.fact_items();
                let r = self.reason(
                    &question,
                    &facts,
                    template_ids::SOLVE_RELEVANT,
                    "reason-relevant",
                    AnswerSource::Ir,
                )?;
                (Vec::new(), facts, r)
            }
            None => {
                let (ids, facts) = self.retrieve(&question)?;
                let r = self.reason(
                    &question,
                    &facts,
                    template_ids::SOLVE_HISTORICAL,
                    "reason",
                    AnswerSource::Ir,
                )?;
                (ids, facts, r)
            }
        };
        Ok(SolveTrace {
            node_idx: node.idx,
            seq: 0,
            question,
            retrieved_fact_ids,
            facts,
            ir_answer: Some(reasoned.answer.clone()),
            child_answer: None,
            final_answer: reasoned.answer,
            llm_calls: reasoned.calls,
            violations: Vec::new(),
        })
    }

    fn solve_inner(
        &self,
        tree: &QueryTree,
        node: &DecompositionNode,
        question: String,
        depth: usize,
        progress: &mut Progress,
    ) -> Result<SolveTrace, SolveError> {
        let mut prior: BTreeMap<usize, Answer> = BTreeMap::new();
        let mut child_answers: Vec<Answer> = Vec::with_capacity(node.sons.len());
        let mut child_questions = Vec::with_capacity(node.sons.len());
        let mut consumed = vec![false; node.sons.len()];
        for (pos, &c) in node.sons.iter().enumerate() {
            let child = tree.node(c);
            let refs = placeholder_refs(&child.question_text);
            for &j in &refs {
                if let Some(flag) = consumed.get_mut(j.wrapping_sub(1)) {
                    *flag = true;
                }
            }
            // A sub-question built on an unanswered sibling cannot be asked.
            let failed_ref = refs
                .iter()
                .copied()
                .find(|j| prior.get(j).is_some_and(|a| !a.is_valid()));
            let (asked, answer) = match failed_ref {
                Some(j) => {
                    let reason = format!("depends on unanswered sub-question #{j}");
                    let answer = self.skip_subtree(tree, child, &reason, progress);
                    (child.question_text.clone(), answer)
                }
                None => {
                    let asked = standardize_time(&replace_placeholders(&child.question_text, &prior)?);
                    let answer =
                        self.solve_node(tree, child, asked.clone(), child_answers.last(), depth + 1, progress)?;
                    (asked, answer)
                }
            };
            prior.insert(pos + 1, answer.clone());
            child_answers.push(answer);
            child_questions.push(asked);
        }
        let mut calls = 0;

        let terminal: Vec<Answer> = child_answers
            .iter()
            .zip(&consumed)
            .map(|(a, &used)| if used { Answer::unknown(a.source) } else { a.clone() })
            .collect();
        let summary = self.summarize(&question, &child_answers, &terminal)?;
        calls += summary.calls;

        let (ids, facts) = self.retrieve(&question)?;
        let ir = self.reason(
            &question,
            &facts,
            template_ids::SOLVE_HISTORICAL,
            "reason",
            AnswerSource::Ir,
        )?;
        calls += ir.calls;

        let candidates = if self.config.third_source {
            let mut context = facts.clone();
            for (q, a) in child_questions.iter().zip(&child_answers) {
                context.push(format!("{q} {}", a.render()));
            }
            let third = self.reason(
                &question,
                &context,
                template_ids::SOLVE_HISTORICAL,
                "third-source",
                AnswerSource::Ir,
            )?;
            calls += third.calls;
            CandidateSet::three(ir.answer.clone(), summary.answer.clone(), third.answer)
        } else {
            CandidateSet::two(ir.answer.clone(), summary.answer.clone())
        };
        let chosen = self.aggregator.aggregate(&candidates, &question, self.gateway)?;
        calls += chosen.llm_calls;

        Ok(SolveTrace {
            node_idx: node.idx,
            seq: 0,
            question,
            retrieved_fact_ids: ids,
            facts,
            ir_answer: Some(ir.answer),
            child_answer: Some(summary.answer),
            final_answer: chosen.answer,
            llm_calls: calls,
            violations: Vec::new(),
        })
    }

    /// Records an Error trace for `node` and everything below it without
    /// calling the model.
    fn skip_subtree(
        &self,
        tree: &QueryTree,
        node: &DecompositionNode,
        reason: &str,
        progress: &mut Progress,
    ) -> Answer {
        for &c in &node.sons {
            self.skip_subtree(tree, tree.node(c), reason, progress);
        }
        let answer = Answer::error(AnswerSource::Ir, reason);
        progress.traces[node.idx] = Some(SolveTrace {
            node_idx: node.idx,
            seq: progress.seq,
            question: node.question_text.clone(),
            retrieved_fact_ids: Vec::new(),
            facts: Vec::new(),
            ir_answer: None,
            child_answer: None,
            final_answer: answer.clone(),
            llm_calls: 0,
            violations: Vec::new(),
        });
        progress.seq += 1;
        answer
    }

    fn retrieve(&self, question: &str) -> Result<(Vec<FactId>, Vec<String>), SolveError> {
        let hits = self.retriever.retrieve(question, self.config.top_k)?;
        let ids: Vec<FactId> = hits.iter().map(|h| h.fact_id).collect();
        let facts = ids
            .iter()
            .filter_map(|&id| self.retriever.text(id).map(str::to_string))
            .collect();
        Ok((ids, facts))
    }

    /// One reasoning call. Replay misses abort; any other gateway failure
    /// becomes an `Error` answer so the parent can still recover.
    fn reason(
        &self,
        question: &str,
        facts: &[String],
        template_id: &str,
        stage: &str,
        source: AnswerSource,
    ) -> Result<Reasoned, SolveError> {
        let prompt = self
            .prompts
            .render(template_id, &PromptInput::Facts { facts, question })?;
        let request = LlmRequest::new(&self.config.model_id, prompt)
            .with_temperature(self.config.temperature)
            .labeled(stage, question);
        let answer = match self.gateway.complete(&request) {
            Ok(resp) => parse_answer(&resp.text, source),
            Err(e @ (LlmError::FixtureMiss { .. } | LlmError::CacheMiss { .. })) => return Err(e.into()),
            Err(e) => Answer::error(source, e.to_string()),
        };
        Ok(Reasoned { answer, calls: 1 })
    }

    /// The last sub-question resolves the parent by construction, so its
    /// answer passes straight through when valid. Otherwise the valid child
    /// answers are put to the model as a candidate list.
    /// Intermediate answers (those a later sibling consumed through a
    /// placeholder) are not offered as candidates, so `terminal` holds them
    /// as Unknown.
    fn summarize(&self, question: &str, child_answers: &[Answer], terminal: &[Answer]) -> Result<Reasoned, SolveError> {
        if let Some(last) = child_answers.last().filter(|a| a.is_valid()) {
            return Ok(Reasoned {
                answer: last.clone().with_source(AnswerSource::Child),
                calls: 0,
            });
        }
        let items: Vec<String> = terminal
            .iter()
            .filter(|a| a.is_valid())
            .flat_map(Answer::fact_items)
            .collect();
        if items.is_empty() {
            return Ok(Reasoned {
                answer: Answer::unknown(AnswerSource::Child),
                calls: 0,
            });
        }
        self.reason(
            question,
            &items,
            template_ids::SOLVE_RELEVANT,
            "summarize",
            AnswerSource::Child,
        )
    }
}
