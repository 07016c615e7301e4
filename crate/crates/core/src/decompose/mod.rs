//! Question classification and LLM-driven decomposition into a tree of
//! sub-questions.

mod classify;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{classify_question, Category, Complexity, QuestionType};
pub(crate) use tree::placeholder_regex;
pub use tree::{placeholder_refs, DecompositionNode, DecompositionStruct, QueryTree};

use crate::llm::{Gateway, LlmError, LlmRequest, PromptInput, PromptLibrary};
use crate::solve::standardize_time;

pub const DEFAULT_MAX_DEPTH: usize = 4;
pub const REPAIR_NUDGE: &str = "Return valid JSON only.";

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("malformed decomposition for {question:?}: {reason}")]
    MalformedDecomposition { question: String, reason: String },
    #[error("sub-question {position} ({question:?}) references #{reference}, which is not an earlier sibling")]
    PlaceholderViolation {
        question: String,
        position: usize,
        reference: usize,
    },
    #[error("decomposition depth {depth} exceeds the limit of {max}")]
    DepthExceeded { depth: usize, max: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone)]
pub struct DecomposeConfig {
    pub model_id: String,
    pub temperature: f32,
    pub max_depth: usize,
    /// Fail instead of falling back to a single-node tree when the response
    /// stays unparseable after the repair attempt.
    pub strict: bool,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_depth: DEFAULT_MAX_DEPTH,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub tree: QueryTree,
    pub llm_calls: u32,
    /// Set when the tree is a single-node fallback; says why.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

pub fn decompose(
    question: &str,
    qtype: QuestionType,
    gateway: &Gateway,
    prompts: &PromptLibrary,
    config: &DecomposeConfig,
) -> Result<Decomposition, DecomposeError> {
    let root_text = standardize_time(question);
    let prompt = prompts.render(qtype.category.template_id(), &PromptInput::Question(question))?;
    let request = LlmRequest::new(&config.model_id, prompt)
        .with_temperature(config.temperature)
        .labeled("decompose", question);
    let mut calls = 1;
    let first = gateway.complete(&request)?;
    let parsed = match DecompositionStruct::parse(&first.text) {
        Ok(s) => Ok(s),
        Err(reason) => {
            log::debug!("decomposition of {question:?} unparseable ({reason}); retrying");
            let mut repair = request.clone().labeled("decompose-repair", question);
            repair.user_content = format!("{}\n\n{REPAIR_NUDGE}", repair.user_content);
            calls += 1;
            let second = gateway.complete(&repair)?;
            DecompositionStruct::parse(&second.text)
        }
    };
    match parsed {
        Ok(mut s) => {
            s.question = root_text;
            let tree = QueryTree::from_struct(&s, qtype, config.max_depth)?;
            Ok(Decomposition {
                tree,
                llm_calls: calls,
                fallback: None,
            })
        }
        Err(reason) if config.strict => Err(DecomposeError::MalformedDecomposition {
            question: question.to_string(),
            reason,
        }),
        Err(reason) => {
            log::warn!("decomposition of {question:?} failed ({reason}); answering it directly");
            Ok(Decomposition {
                tree: QueryTree::leaf_only(&root_text, qtype),
                llm_calls: calls,
                fallback: Some(format!("malformed decomposition: {reason}")),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{PlaybookBackend, PlaybookEntry};

    fn gateway(entries: Vec<PlaybookEntry>) -> Gateway {
        Gateway::new(Box::new(PlaybookBackend::new(entries)))
    }

    #[test]
    fn root_text_is_standardized_input() {
        let q = "Who negotiated with Colombia before 22 December 2010?";
        let gw = gateway(vec![PlaybookEntry::text(
            Some("decompose"),
            q,
            r#"{"Who negotiated with Colombia before 2010-12-22?": []}"#,
        )]);
        let qt = classify_question(q, None);
        let d = decompose(q, qt, &gw, &PromptLibrary::builtin(), &DecomposeConfig::default()).unwrap();
        assert_eq!(d.tree.len(), 1);
        assert_eq!(
            d.tree.root().question_text,
            "Who negotiated with Colombia before 2010-12-22?"
        );
        assert_eq!(d.llm_calls, 1);
    }

    #[test]
    fn repair_then_fallback() {
        let q = "Who visited Japan?";
        let gw = gateway(vec![
            PlaybookEntry::text(Some("decompose"), q, "not json"),
            PlaybookEntry::text(Some("decompose-repair"), q, "still not json"),
        ]);
        let qt = classify_question(q, None);
        let lib = PromptLibrary::builtin();
        let d = decompose(q, qt, &gw, &lib, &DecomposeConfig::default()).unwrap();
        assert_eq!((d.tree.len(), d.llm_calls), (1, 2));
        assert!(d.fallback.is_some());

        let strict = DecomposeConfig {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            decompose(q, qt, &gw, &lib, &strict),
            Err(DecomposeError::MalformedDecomposition { .. })
        ));
    }

    #[test]
    fn repair_can_succeed() {
        let q = "Who visited Japan?";
        let gw = gateway(vec![
            PlaybookEntry::text(Some("decompose"), q, "{oops"),
            PlaybookEntry::text(Some("decompose-repair"), q, r#"{"Who visited Japan?": []}"#),
        ]);
        let d = decompose(
            q,
            classify_question(q, None),
            &gw,
            &PromptLibrary::builtin(),
            &DecomposeConfig::default(),
        )
        .unwrap();
        assert!(d.fallback.is_none());
        assert_eq!(gw.calls(), 2);
    }

    #[test]
    fn placeholder_violation_surfaces() {
        let q = "q";
        let gw = gateway(vec![PlaybookEntry::text(
            None,
            q,
            r##"{"q": ["uses #2 before #1 defined"]}"##,
        )]);
        let r = decompose(
            q,
            classify_question(q, None),
            &gw,
            &PromptLibrary::builtin(),
            &DecomposeConfig::default(),
        );
        assert!(matches!(r, Err(DecomposeError::PlaceholderViolation { .. })));
    }

    #[test]
    fn fixture_miss_is_an_error() {
        let gw = gateway(vec![]);
        let r = decompose(
            "x",
            classify_question("x", None),
            &gw,
            &PromptLibrary::builtin(),
            &DecomposeConfig::default(),
        );
        assert!(matches!(r, Err(DecomposeError::Llm(LlmError::FixtureMiss { .. }))));
    }
}
