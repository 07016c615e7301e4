//! Final-answer selection among candidate sources.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{template_ids, Gateway, LlmError, LlmRequest, PromptInput, PromptLibrary};
use crate::registry::{Registry, UnknownStrategy};
use crate::solve::{parse_answer, Answer, AnswerSource, AnswerValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceLabel {
    A,
    B,
    C,
}

impl SourceLabel {
    pub fn letter(self) -> char {
        match self {
            SourceLabel::A => 'A',
            SourceLabel::B => 'B',
            SourceLabel::C => 'C',
        }
    }
}

impl fmt::Display for SourceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("candidate sources must be A, B or A, B, C in order")]
pub struct InvalidCandidates;

/// A = the node's own retrieval answer, B = the answer derived from its
/// children, C = an optional third opinion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    sources: Vec<(SourceLabel, Answer)>,
}

impl CandidateSet {
    pub fn new(sources: Vec<(SourceLabel, Answer)>) -> Result<Self, InvalidCandidates> {
        let labels: Vec<SourceLabel> = sources.iter().map(|(l, _)| *l).collect();
        match labels.as_slice() {
            [SourceLabel::A, SourceLabel::B] | [SourceLabel::A, SourceLabel::B, SourceLabel::C] => Ok(Self { sources }),
            _ => Err(InvalidCandidates),
        }
    }

    pub fn two(a: Answer, b: Answer) -> Self {
        Self {
            sources: vec![(SourceLabel::A, a), (SourceLabel::B, b)],
        }
    }

    pub fn three(a: Answer, b: Answer, c: Answer) -> Self {
        Self {
            sources: vec![(SourceLabel::A, a), (SourceLabel::B, b), (SourceLabel::C, c)],
        }
    }

    pub fn sources(&self) -> &[(SourceLabel, Answer)] {
        &self.sources
    }

    pub fn get(&self, label: SourceLabel) -> Option<&Answer> {
        self.sources.iter().find(|(l, _)| *l == label).map(|(_, a)| a)
    }
}

/// The selected answer and how many LLM calls selection took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregated {
    pub answer: Answer,
    pub llm_calls: u32,
}

pub trait Aggregator: Send + Sync {
    fn name(&self) -> &str;

    /// Only scripted/cached replay misses are errors; everything else
    /// degrades to the precedence rules.
    fn aggregate(&self, candidates: &CandidateSet, question: &str, gateway: &Gateway) -> Result<Aggregated, LlmError>;
}

/// Highest-priority valid source: C, then B, then A. `Unknown` if none.
pub fn aggregate_rules(candidates: &CandidateSet) -> Answer {
    candidates
        .sources
        .iter()
        .rev()
        .find(|(_, a)| a.is_valid())
        .map(|(_, a)| a.clone().with_source(AnswerSource::Aggregated))
        .unwrap_or_else(|| Answer::unknown(AnswerSource::Aggregated))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RulesAggregator;

impl Aggregator for RulesAggregator {
    fn name(&self) -> &str {
        "rules"
    }

    fn aggregate(&self, candidates: &CandidateSet, _: &str, _: &Gateway) -> Result<Aggregated, LlmError> {
        Ok(Aggregated {
            answer: aggregate_rules(candidates),
            llm_calls: 0,
        })
    }
}

/// Asks the model to apply the precedence rules. Any answer that is not one
/// of the candidates falls back to [`aggregate_rules`].
#[derive(Debug, Clone)]
pub struct LlmAggregator {
    model_id: String,
    temperature: f32,
    prompts: Arc<PromptLibrary>,
}

impl LlmAggregator {
    pub fn new(model_id: &str, temperature: f32, prompts: Arc<PromptLibrary>) -> Self {
        Self {
            model_id: model_id.to_string(),
            temperature,
            prompts,
        }
    }
}

fn same_answer(a: &AnswerValue, b: &AnswerValue) -> bool {
    let norm = |v: &AnswerValue| crate::solve::render_value(v).trim().to_lowercase();
    a == b || norm(a) == norm(b)
}

impl Aggregator for LlmAggregator {
    fn name(&self) -> &str {
        "llm-assisted"
    }

    fn aggregate(&self, candidates: &CandidateSet, question: &str, gateway: &Gateway) -> Result<Aggregated, LlmError> {
        let listed: Vec<(char, String)> = candidates
            .sources
            .iter()
            .map(|(l, a)| (l.letter(), a.render()))
            .collect();
        let prompt = self.prompts.render(
            template_ids::AGGREGATE,
            &PromptInput::Candidates {
                question,
                candidates: &listed,
            },
        )?;
        let request = LlmRequest::new(&self.model_id, prompt)
            .with_temperature(self.temperature)
            .labeled("aggregate", question);
        let rules = || aggregate_rules(candidates);
        let answer = match gateway.complete(&request) {
            Ok(resp) => {
                let parsed = parse_answer(&resp.text, AnswerSource::Aggregated);
                let picked = candidates
                    .sources
                    .iter()
                    .rev()
                    .find(|(_, a)| a.is_valid() && same_answer(&a.value, &parsed.value));
                match picked {
                    Some((_, a)) => Answer::new(a.value.clone(), AnswerSource::Aggregated, parsed.chain),
                    None => rules(),
                }
            }
            Err(e @ (LlmError::FixtureMiss { .. } | LlmError::CacheMiss { .. })) => return Err(e),
            Err(e) => {
                log::warn!("aggregation call failed ({e}); using precedence rules");
                rules()
            }
        };
        Ok(Aggregated { answer, llm_calls: 1 })
    }
}

#[derive(Debug, Clone)]
pub struct AggregatorConfig {
    pub model_id: String,
    pub temperature: f32,
    pub prompts: Arc<PromptLibrary>,
}

#[derive(Debug, Error)]
#[error(transparent)]
pub struct AggregatorError(#[from] UnknownStrategy);

pub type AggregatorRegistry = Registry<AggregatorConfig, Arc<dyn Aggregator>, AggregatorError>;

/// `rules` and `llm-assisted`.
pub fn aggregator_registry() -> AggregatorRegistry {
    let mut reg = AggregatorRegistry::new("aggregation mode");
    reg.register("rules", |_| Ok(Arc::new(RulesAggregator)));
    reg.register("llm-assisted", |cfg| {
        Ok(Arc::new(LlmAggregator::new(
            &cfg.model_id,
            cfg.temperature,
            cfg.prompts.clone(),
        )))
    });
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{PlaybookBackend, PlaybookEntry};
    use crate::solve::parse_answer_value;

    fn ans(text: &str) -> Answer {
        Answer::new(parse_answer_value(text), AnswerSource::Ir, "")
    }

    fn no_llm() -> Gateway {
        Gateway::new(Box::new(PlaybookBackend::new(vec![])))
    }

    #[test]
    fn rules_examples() {
        let c = CandidateSet::three(ans("2012-09-04"), ans("2012-09-04"), ans("Unknown"));
        assert_eq!(aggregate_rules(&c).render(), "2012-09-04");
        let c = CandidateSet::three(
            ans("Jorge Briz Abularach"),
            ans("Unknown"),
            ans("House of Representatives (Uruguay)"),
        );
        assert_eq!(aggregate_rules(&c).render(), "House of Representatives (Uruguay)");
        let c = CandidateSet::two(ans("Sri Lanka"), ans("China"));
        let out = aggregate_rules(&c);
        assert_eq!((out.render().as_str(), out.source), ("China", AnswerSource::Aggregated));
        let c = CandidateSet::two(ans("Unknown"), Answer::error(AnswerSource::Child, "x"));
        assert_eq!(aggregate_rules(&c).value, AnswerValue::Unknown);
    }

    #[test]
    fn candidate_order_is_enforced() {
        let a = ans("x");
        assert!(CandidateSet::new(vec![(SourceLabel::B, a.clone()), (SourceLabel::A, a.clone())]).is_err());
        assert!(CandidateSet::new(vec![(SourceLabel::A, a.clone())]).is_err());
        assert!(CandidateSet::new(vec![(SourceLabel::A, a.clone()), (SourceLabel::B, a)]).is_ok());
    }

    #[test]
    fn llm_assisted_picks_candidate_or_falls_back() {
        let q = "Who rejected the Prime Minister of India after 2012-01-03?";
        let agg = LlmAggregator::new("m", 0.0, Arc::new(PromptLibrary::builtin()));
        let c = CandidateSet::two(ans("Sri Lanka"), ans("China"));

        let gw = Gateway::new(Box::new(PlaybookBackend::new(vec![PlaybookEntry::text(
            Some("aggregate"),
            q,
            "So the answer is: China",
        )])));
        let out = agg.aggregate(&c, q, &gw).unwrap();
        assert_eq!((out.answer.render().as_str(), out.llm_calls), ("China", 1));

        // a synthesized value is never accepted
        let gw = Gateway::new(Box::new(PlaybookBackend::new(vec![PlaybookEntry::text(
            None,
            q,
            "So the answer is: India",
        )])));
        assert_eq!(agg.aggregate(&c, q, &gw).unwrap().answer.render(), "China");

        let gw = Gateway::new(Box::new(PlaybookBackend::new(vec![PlaybookEntry::error(
            None, q, "down",
        )])));
        assert_eq!(agg.aggregate(&c, q, &gw).unwrap().answer.render(), "China");

        assert!(agg.aggregate(&c, q, &no_llm()).is_err());
    }

    #[test]
    fn registry_names() {
        let reg = aggregator_registry();
        assert_eq!(reg.names(), vec!["llm-assisted", "rules"]);
        let cfg = AggregatorConfig {
            model_id: "m".into(),
            temperature: 0.0,
            prompts: Arc::new(PromptLibrary::builtin()),
        };
        let rules = reg.create("rules", &cfg).unwrap();
        let c = CandidateSet::two(ans("A"), ans("B"));
        assert_eq!(rules.aggregate(&c, "q", &no_llm()).unwrap().answer.render(), "B");
        assert!(reg.create("vote", &cfg).is_err());
    }
}
