//! Few-shot prompt templates and their rendering.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptLayout {
    /// `Q: <question>\nA:`
    Decomposition,
    /// `Historical facts:` block, then question and `Answer:`.
    HistoricalFacts,
    /// `Relevant facts: [...]`, then question and `Answer:`.
    RelevantFacts,
    /// Question, lettered candidate sources, then `Output:`.
    Aggregation,
}

impl PromptLayout {
    fn output_label(self) -> &'static str {
        match self {
            PromptLayout::Decomposition => "A:",
            PromptLayout::HistoricalFacts | PromptLayout::RelevantFacts => "Answer:",
            PromptLayout::Aggregation => "Output:",
        }
    }
}

/// One worked example. `input` is the fully formatted block preceding the
/// output label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub layout: PromptLayout,
    pub instruction: String,
    #[serde(default)]
    pub few_shot_examples: Vec<FewShot>,
}

/// What gets filled into the query slot of a template.
#[derive(Debug, Clone, Copy)]
pub enum PromptInput<'a> {
    Question(&'a str),
    Facts {
        facts: &'a [String],
        question: &'a str,
    },
    Candidates {
        question: &'a str,
        candidates: &'a [(char, String)],
    },
}

impl PromptInput<'_> {
    pub fn question(&self) -> &str {
        match self {
            PromptInput::Question(q) => q,
            PromptInput::Facts { question, .. } | PromptInput::Candidates { question, .. } => question,
        }
    }
}

/// The instruction goes to the system slot; examples and query to the user slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

impl RenderedPrompt {
    pub fn full_text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

fn quote_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", quoted.join(", "))
}

impl PromptTemplate {
    fn query_block(&self, input: &PromptInput<'_>) -> String {
        let label = self.layout.output_label();
        match (self.layout, input) {
            (PromptLayout::Decomposition, _) => format!("Q: {}\n{label}", input.question()),
            (PromptLayout::HistoricalFacts, PromptInput::Facts { facts, question }) => {
                format!("Historical facts:\n{}\nQuestion: {question}\n{label}", facts.join("\n"))
            }
            (PromptLayout::RelevantFacts, PromptInput::Facts { facts, question }) => {
                format!("Relevant facts: {}\nQuestion: {question}\n{label}", quote_list(facts))
            }
            (PromptLayout::Aggregation, PromptInput::Candidates { question, candidates }) => {
                let mut s = format!("Question: {question}\nCandidate answer:\n");
                for (letter, answer) in candidates.iter() {
                    s.push_str(&format!("source {letter}: {answer}\n"));
                }
                s.push_str(label);
                s
            }
            (PromptLayout::HistoricalFacts, _) => {
                format!("Historical facts:\n\nQuestion: {}\n{label}", input.question())
            }
            (PromptLayout::RelevantFacts, _) => format!("Relevant facts: []\nQuestion: {}\n{label}", input.question()),
            (PromptLayout::Aggregation, _) => format!("Question: {}\nCandidate answer:\n{label}", input.question()),
        }
    }

    pub fn render(&self, input: &PromptInput<'_>) -> RenderedPrompt {
        let label = self.layout.output_label();
        let mut user = String::new();
        if !self.few_shot_examples.is_empty() {
            user.push_str("Here are a few examples:\n\n");
            for ex in &self.few_shot_examples {
                user.push_str(&format!("{}\n{label} {}\n\n", ex.input, ex.output));
            }
        }
        user.push_str(&self.query_block(input));
        RenderedPrompt {
            system: format!("Instruction:\n{}", self.instruction),
            user,
        }
    }
}

/// Full prompt text: instruction, examples in order, then the question.
pub fn render_prompt(template: &PromptTemplate, question: &str) -> String {
    template.render(&PromptInput::Question(question)).full_text()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLibrary {
    templates: BTreeMap<String, PromptTemplate>,
}

pub mod ids {
    pub const DECOMPOSE_EQUAL: &str = "decompose/equal";
    pub const DECOMPOSE_BEFORE_AFTER: &str = "decompose/before-after";
    pub const DECOMPOSE_FIRST_LAST: &str = "decompose/first-last";
    pub const DECOMPOSE_EQUAL_MULTI: &str = "decompose/equal-multi";
    pub const DECOMPOSE_BEFORE_LAST: &str = "decompose/before-last";
    pub const DECOMPOSE_AFTER_FIRST: &str = "decompose/after-first";
    pub const DECOMPOSE_TIMELINE: &str = "decompose/timeline";
    pub const SOLVE_HISTORICAL: &str = "solve/historical-facts";
    pub const SOLVE_RELEVANT: &str = "solve/relevant-facts";
    pub const AGGREGATE: &str = "aggregate/select";
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptLibrary {
    pub fn empty() -> Self {
        Self {
            templates: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut lib = Self::empty();
        for t in builtin::all() {
            lib.insert(t);
        }
        lib
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.template_id.clone(), template);
    }

    /// Replaces or adds templates from a JSON array of templates.
    pub fn extend_from_file(&mut self, path: &Path) -> Result<(), LlmError> {
        let text = fs::read_to_string(path)?;
        let templates: Vec<PromptTemplate> = serde_json::from_str(&text).map_err(|e| LlmError::BadFixture {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        for t in templates {
            self.insert(t);
        }
        Ok(())
    }

    pub fn get(&self, template_id: &str) -> Result<&PromptTemplate, LlmError> {
        self.templates
            .get(template_id)
            .ok_or_else(|| LlmError::UnknownTemplate(template_id.to_string()))
    }

    pub fn render(&self, template_id: &str, input: &PromptInput<'_>) -> Result<RenderedPrompt, LlmError> {
        Ok(self.get(template_id)?.render(input))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

mod builtin {
    use super::{ids, FewShot, PromptLayout, PromptTemplate};

    fn decomposition(id: &str, instruction: &str, examples: &[(&str, &str)]) -> PromptTemplate {
        PromptTemplate {
            template_id: id.into(),
            layout: PromptLayout::Decomposition,
            instruction: instruction.into(),
            few_shot_examples: examples
                .iter()
                .map(|(q, a)| FewShot {
                    input: format!("Q: {q}"),
                    output: (*a).into(),
                })
                .collect(),
        }
    }

    fn leaf(q: &str) -> String {
        format!("{{\"{q}\": []}}")
    }

    fn tree(q: &str, subs: &[&str]) -> String {
        let subs: Vec<String> = subs.iter().map(|s| format!("\"{s}\"")).collect();
        format!("{{\"{q}\": [{}]}}", subs.join(", "))
    }

    const EQUAL_INSTRUCTION: &str = "Convert the following question into a JSON object where the question is the key and the value is an empty list. Do not include any explanation or extra text. Just return the JSON.\nJust return the modified question in JSON format with an empty list as its value.";

    const BEFORE_AFTER_INSTRUCTION: &str = "You are an expert specializing in dealing with problems containing the keywords \"before/after\". You need to read the question carefully.\n\n1.If the problem involves a situation like \"before December 13, 2005\" with a \"before+ timestamp\", there is no need to decompose the original problem. Just convert the question into a JSON object where the question is the key and the value is an empty list.\n\n2.If the problem involves the situation of a \"before+ entity\" like \"before Japan\", the original problem needs to be decomposed into sub-problems. First, generate an explicit sub-question to determine the time (e.g., \"When did Iran…?\"). When a sub-question is logically depends on the answer to a previous one, use placeholders (e.g., #1) to refer to that answer. Return a valid JSON object representing the question tree. Each key is a parent question, and its value is a list of sub-questions.";

    const FIRST_LAST_INSTRUCTION: &str = "You are an expert specializing in dealing with problems containing the keywords \"first/last\". You need to read the question carefully.\n\nRewrite every time expression in ISO 8601 form (yyyy, yyyy-mm or yyyy-mm-dd). The question can be answered directly from the retrieved facts, so there is no need to decompose it. Just convert the question into a JSON object where the question is the key and the value is an empty list. Do not include any explanation or extra text. Just return the JSON.";

    const EQUAL_MULTI_INSTRUCTION: &str = "You are an expert specializing in dealing with problems whose time is given implicitly by another event (e.g., \"in the same month as ...\"). You need to read the question carefully.\n\n1.If the time is given explicitly, there is no need to decompose the original problem. Just convert the question into a JSON object where the question is the key and the value is an empty list.\n\n2.If the time is given by another event, first generate an explicit sub-question to determine that time at the requested granularity, then ask the original question with a placeholder (e.g., #1) referring to that answer. Return a valid JSON object representing the question tree. Each key is a parent question, and its value is a list of sub-questions.";

    const BEFORE_LAST_INSTRUCTION: &str = "You are an expert specializing in dealing with problems that combine \"before/after\" with \"last/first\". You need to read the question carefully.\n\n1.If the problem involves a \"before+ entity\" like \"before Kuwait\", first generate an explicit sub-question to determine the time (e.g., \"When did Kuwait…?\"). Then ask which entities satisfy the constraint relative to that time, using a placeholder (e.g., #1) to refer to the answer. Finally ask which one among them was the last (or first).\n\n2.If the problem involves a \"before+ timestamp\", ask which entities satisfy the constraint and then which one among them was the last (or first).\n\nRewrite every time expression in ISO 8601 form. Return a valid JSON object representing the question tree. Each key is a parent question, and its value is a list of sub-questions.";

    const TIMELINE_INSTRUCTION: &str = "You are an expert in breaking complex temporal questions into simpler sub-questions. You need to read the question carefully.\n\nIf the question can be answered with a single fact lookup, convert it into a JSON object where the question is the key and the value is an empty list. Otherwise list the sub-questions in the order they must be solved. When a sub-question logically depends on the answer to a previous one, use placeholders (e.g., #1, #2) to refer to that answer. Rewrite every time expression in ISO 8601 form. Return a valid JSON object representing the question tree. Each key is a parent question, and its value is a list of sub-questions.";

    pub fn all() -> Vec<PromptTemplate> {
        let equal = decomposition(
            ids::DECOMPOSE_EQUAL,
            EQUAL_INSTRUCTION,
            &[
                (
                    "Who visited France in 2009-05?",
                    &leaf("Who visited France in 2009-05?"),
                ),
                (
                    "When did Qatar pay a visit to Barack Obama?",
                    &leaf("When did Qatar pay a visit to Barack Obama?"),
                ),
                (
                    "Who applied for Iran in January 2010?",
                    &leaf("Who applied for Iran in 2010-01?"),
                ),
                // Year mismatch reproduced as published.
                (
                    "Which country negotiated with Japan on 19 April 2005?",
                    &leaf("Which country negotiated with Japan on 2002-04-19?"),
                ),
                (
                    "Who visited Japan in April 2012?",
                    &leaf("Who visited Japan in 2012-04?"),
                ),
                (
                    "In May 2009, who signed an agreement with Iran?",
                    &leaf("In 2009-05, who signed an agreement with Iran?"),
                ),
                ("Who accused Iran in 2015?", &leaf("Who accused Iran in 2015?")),
                (
                    "On 19 March 2006, who threatened Iran?",
                    &leaf("On 2006-03-19, who threatened Iran?"),
                ),
                (
                    "Who visited Guatemala on 7 July 2007?",
                    &leaf("Who visited Guatemala on 2007-07-07?"),
                ),
            ],
        );

        let before_after = decomposition(
            ids::DECOMPOSE_BEFORE_AFTER,
            BEFORE_AFTER_INSTRUCTION,
            &[
                (
                    "Who rejected Iran before the citizens of State Actor did?",
                    &tree(
                        "Who rejected Iran before the citizens of State Actor did?",
                        &[
                            "When did the citizens of State Actor reject Iran?",
                            "Who rejected Iran before #1?",
                        ],
                    ),
                ),
                (
                    "After Japan, who made South Korea suffer from conventional military forces?",
                    &tree(
                        "After Japan, who made South Korea suffer from conventional military forces?",
                        &[
                            "When did Japan make South Korea suffer from conventional military forces?",
                            "Who make South Korea suffer from conventional military forces after #1?",
                        ],
                    ),
                ),
                (
                    "Which country did Qatar appeal to after April 2011?",
                    &leaf("Which country did Qatar appeal to after 2011-04?"),
                ),
                (
                    "Before 14 October 2015, who made Burundi suffer from conventional military forces?",
                    &leaf("Before 2015-10-14, who made Burundi suffer from conventional military forces?"),
                ),
                (
                    "Who had a telephone conversation with Japan after November 2005?",
                    &leaf("Who had a telephone conversation with Japan after 2005-11?"),
                ),
                (
                    "Who negotiated with Colombia before 22 December 2010?",
                    &leaf("Who negotiated with Colombia before 2010-12-22?"),
                ),
                (
                    "With which country did Qatar sign formal agreements before 15 January 2008?",
                    &leaf("With which country did Qatar sign formal agreements before 2008-01-15?"),
                ),
                (
                    "After November 2007, who wanted to engage in diplomatic cooperation with Timor-Leste?",
                    &leaf("After 2007-11, who wanted to engage in diplomatic cooperation with Timor-Leste?"),
                ),
                (
                    "Before 24 January 2005, who wanted to establish diplomatic cooperation with the Kuomintang?",
                    &leaf("Before 2005-01-24, who wanted to establish diplomatic cooperation with the Kuomintang?"),
                ),
                (
                    "Who negotiated with Bolivia after June 2007?",
                    &leaf("Who negotiated with Bolivia after 2007-06?"),
                ),
            ],
        );

        let first_last = decomposition(
            ids::DECOMPOSE_FIRST_LAST,
            FIRST_LAST_INSTRUCTION,
            &[
                (
                    "Who was the first to visit Kuwait in 2014?",
                    &leaf("Who was the first to visit Kuwait in 2014?"),
                ),
                (
                    "When did Qatar last negotiate with Iran?",
                    &leaf("When did Qatar last negotiate with Iran?"),
                ),
                (
                    "In March 2008, who was the last to criticize Japan?",
                    &leaf("In 2008-03, who was the last to criticize Japan?"),
                ),
            ],
        );

        let equal_multi = decomposition(
            ids::DECOMPOSE_EQUAL_MULTI,
            EQUAL_MULTI_INSTRUCTION,
            &[
                (
                    "In the same month as Iran accused Israel, who praised Japan?",
                    &tree(
                        "In the same month as Iran accused Israel, who praised Japan?",
                        &["In which month did Iran accuse Israel?", "Who praised Japan in #1?"],
                    ),
                ),
                (
                    "Who praised Japan in June 2008?",
                    &leaf("Who praised Japan in 2008-06?"),
                ),
            ],
        );

        let before_last = decomposition(
            ids::DECOMPOSE_BEFORE_LAST,
            BEFORE_LAST_INSTRUCTION,
            &[
                (
                    "Before Kuwait, which country received the Government Delegation of North Korea's visit last?",
                    &tree(
                        "Before Kuwait, which country received the Government Delegation of North Korea's visit last?",
                        &[
                            "When did Kuwait receive the Government Delegation of North Korea's visit?",
                            "Which countries received the Government Delegation of North Korea's visit before #1?",
                            "Which was the latest among them?",
                        ],
                    ),
                ),
                (
                    "Who was the last to visit Japan before March 2010?",
                    &tree(
                        "Who was the last to visit Japan before 2010-03?",
                        &["Who visited Japan before 2010-03?", "Who was the last one among them?"],
                    ),
                ),
            ],
        );

        let after_first = decomposition(
            ids::DECOMPOSE_AFTER_FIRST,
            BEFORE_LAST_INSTRUCTION,
            &[
                (
                    "After the Ministry of Japan, who was the first to criticize China?",
                    &tree(
                        "After the Ministry of Japan, who was the first to criticize China?",
                        &[
                            "When did the Ministry of Japan criticize China?",
                            "Who criticized China after #1?",
                            "Who was the first one among them?",
                        ],
                    ),
                ),
                (
                    "Who was the first to negotiate with Bolivia after 2007-06?",
                    &tree(
                        "Who was the first to negotiate with Bolivia after 2007-06?",
                        &[
                            "Who negotiated with Bolivia after 2007-06?",
                            "Who was the first one among them?",
                        ],
                    ),
                ),
            ],
        );

        let timeline = decomposition(
            ids::DECOMPOSE_TIMELINE,
            TIMELINE_INSTRUCTION,
            &[
                (
                    "When Stalin ended his leadership in his own country, what job did Churchill work for?",
                    &tree(
                        "When Stalin ended his leadership in his own country, what job did Churchill work for?",
                        &[
                            "Which country did Stalin lead?",
                            "When did Stalin end his leadership in #1?",
                            "When #2, what job did Churchill work for?",
                        ],
                    ),
                ),
                (
                    "Who was the president of France in 2009?",
                    &leaf("Who was the president of France in 2009?"),
                ),
            ],
        );

        let historical = PromptTemplate {
            template_id: ids::SOLVE_HISTORICAL.into(),
            layout: PromptLayout::HistoricalFacts,
            instruction: "Based on the historical facts, please answer the given question clearly in the following format: ...So the answer is: <final concise answer>.\n\n1.If the question asks for a specific year (e.g., \"Which year\", \"In which year\", \"the exact year\", etc.), then return the answer in \"yyyy\" format. Just return the most appropriate timestamp as the answer.\n\n2.If the question asks for a specific month (e.g., \"Which month\", \"In what month\", \"the exact month\", etc.), then return the answer in \"yyyy-mm\" format, including the year and the month. Just return the most appropriate timestamp as the answer.\n\n3.If the question asks for a specific date (e.g., contains keywords like \"When\", \"What day\", \"the exact date\", etc.), return the answer in \"yyyy-mm-dd\" format. Just return the most appropriate timestamp as the answer.\n\n4.If the question asks for a set of entities (e.g., contains keywords like \"who\", \"which country\", etc.), and multiple sources in the context offer valid answers, return the union of all correct, non-duplicate entities and attached timestamp in a list format.".into(),
            few_shot_examples: vec![
                FewShot {
                    input: "Historical facts:\nBarack Obama Reject Party Member (United Kingdom) 2008-09-23.\nBarack Obama Reject Party Member (United Kingdom) 2008-09-23.\nBarack Obama Make statement Party Member (United Kingdom) 2008-11-08.\nBarack Obama Make statement Party Member (United Kingdom) 2008-11-08.\nBarack Obama Express intent to meet or negotiate Party Member (United Kingdom) 2009-03-10.\nZawahiri Reject Barack Obama 2009-08-04.\nQuestion: In which year did Barack Obama reject the party member of United Kingdom?".into(),
                    output: "The rejection event occurred on 2008-09-23, so the year is 2008. So the answer is: 2008.".into(),
                },
                FewShot {
                    input: "Historical facts:\nMedia Personnel (Somalia) Praise or endorse Cabinet / Council of Ministers / Advisors (Somalia) 2012-11-27.\nMedia Personnel (Somalia) Praise or endorse Cabinet / Council of Ministers / Advisors (Somalia) 2015-01-12.\nMedia Personnel (Somalia) Make statement African Union 2007-10-08.\nMedia Personnel (Somalia) Make statement African Union 2007-01-17.\nMedia Personnel (Somalia) Make statement African Union 2012-11-18.\nCabinet / Council of Ministers / Advisors (Somalia) Praise or endorse Media Personnel (Somalia) 2011-11-28.\nMedia Personnel (Somalia) Make statement African Union 2007-06-15.\nQuestion: When did Somalia's media personnel first commend Somalia's council of ministers?".into(),
                    output: "We are asked to find the first time Somalia's media personnel commended (i.e., praised or endorsed) Somalia's Cabinet / Council of Ministers / Advisors. From the historical facts: Media Personnel (Somalia) Praise or endorse Cabinet / Council of Ministers / Advisors (Somalia) on: 2012-11-27 and 2015-01-12. Among these, the earliest instance is 2012-11-27. So the answer is: 2012-11-27.".into(),
                },
                FewShot {
                    input: "Historical facts:\nAgence France-Presse Demand China in 2010-05-26.\nAgence France-Presse Make an appeal or request China in 2007-01-08.\nChina Appeal for military aid Agence France-Presse in 2008-03-26.\nFrance Make an appeal or request China in 2012-06-05.\nFrance Demand China in 2008-06-11.\nQuestion: Could you tell me the exact month when Agence France-Presse appealed to China?".into(),
                    output: "So the answer is: 2007-01".into(),
                },
            ],
        };

        let relevant = PromptTemplate {
            template_id: ids::SOLVE_RELEVANT.into(),
            layout: PromptLayout::RelevantFacts,
            instruction: "Based on the Relevant facts, please answer the given question clearly in the following format: ...So the answer is: <final concise answer>.\n\nEach question provides a series of relevant facts, including \"entity + timestamp\" pairs. You need to choose the earliest or latest entity as the answer based on the order in which the events occurred.".into(),
            few_shot_examples: vec![FewShot {
                input: "Relevant facts: [\"China 2006-01-20\", \"China 2006-10-30\", \"Vietnam 2008-04-30\"]\nQuestion: Which country was the last one among them?".into(),
                output: "The last country among the relevant facts, based on the timestamps, is Vietnam. So the answer is: Vietnam 2008-04-30.".into(),
            }],
        };

        let aggregate = PromptTemplate {
            template_id: ids::AGGREGATE.into(),
            layout: PromptLayout::Aggregation,
            instruction: "You are given a question and multiple candidate answers from sources A, B, and C.\n\nFollow these strict rules to choose the best answer: If only sources A and B are available, prefer B's answer unless it is \"Unknown\" or \"Error\", in which case choose A. If all three sources A, B, and C are available, prefer C's answer unless it is \"Unknown\" or \"Error\", then fall back to B, and if B is also invalid, fall back to A.".into(),
            few_shot_examples: vec![
                FewShot {
                    input: "Question: When did the citizens of Africa express their intention to establish diplomatic cooperation with Vietnam?\nCandidate answer:\nsource A: 2012-09-04\nsource B: 2012-09-04\nSource C: Unknown".into(),
                    output: "So the answer is: 2012-09-04".into(),
                },
                FewShot {
                    input: "Question: Who was the first to praise Juan Carlos I after 2006-02-22?\nCandidate answer:\nsource A: Jorge Briz Abularach\nsource B: Unknown\nSource C: House of Representatives (Uruguay)".into(),
                    output: "So the answer is: House of Representatives (Uruguay)".into(),
                },
                FewShot {
                    input: "Question: Who rejected the Prime Minister of India after 2012-01-03?\nCandidate answer:\nsource A: Sri Lanka\nsource B: China".into(),
                    output: "So the answer is: China".into(),
                },
            ],
        };

        vec![
            equal,
            before_after,
            first_last,
            equal_multi,
            before_last,
            after_first,
            timeline,
            historical,
            relevant,
            aggregate,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_prompt_ends_with_question() {
        let lib = PromptLibrary::builtin();
        let t = lib.get(ids::DECOMPOSE_EQUAL).unwrap();
        let text = render_prompt(t, "Who visited Japan in April 2012?");
        assert!(text.starts_with("Instruction:\nConvert the following question"));
        assert!(text.ends_with("\n\nQ: Who visited Japan in April 2012?\nA:"));
        let example = "Q: Who visited Japan in April 2012?\nA: {\"Who visited Japan in 2012-04?\": []}";
        let pos = text.find(example).expect("example block present");
        assert!(pos < text.rfind("Q: Who visited Japan in April 2012?\nA:").unwrap());
        assert_eq!(text, render_prompt(t, "Who visited Japan in April 2012?"));
    }

    #[test]
    fn examples_keep_their_order() {
        let lib = PromptLibrary::builtin();
        let text = render_prompt(lib.get(ids::DECOMPOSE_EQUAL).unwrap(), "x");
        let a = text.find("Who visited France in 2009-05?").unwrap();
        let b = text.find("Who visited Guatemala on 7 July 2007?").unwrap();
        assert!(a < b);
    }

    #[test]
    fn zero_examples_renders_instruction_and_question() {
        let t = PromptTemplate {
            template_id: "bare".into(),
            layout: PromptLayout::Decomposition,
            instruction: "Do it.".into(),
            few_shot_examples: vec![],
        };
        assert_eq!(render_prompt(&t, "Why?"), "Instruction:\nDo it.\n\nQ: Why?\nA:");
    }

    #[test]
    fn unknown_template_is_an_error() {
        assert!(matches!(
            PromptLibrary::builtin().get("nope"),
            Err(LlmError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn facts_and_candidates_layouts() {
        let lib = PromptLibrary::builtin();
        let facts = vec!["A r B in 2001".to_string(), "C r D in 2002".to_string()];
        let p = lib
            .render(
                ids::SOLVE_HISTORICAL,
                &PromptInput::Facts {
                    facts: &facts,
                    question: "Who?",
                },
            )
            .unwrap();
        assert!(p
            .user
            .ends_with("Historical facts:\nA r B in 2001\nC r D in 2002\nQuestion: Who?\nAnswer:"));

        let p = lib
            .render(
                ids::SOLVE_RELEVANT,
                &PromptInput::Facts {
                    facts: &facts,
                    question: "Last?",
                },
            )
            .unwrap();
        assert!(p
            .user
            .ends_with("Relevant facts: [\"A r B in 2001\", \"C r D in 2002\"]\nQuestion: Last?\nAnswer:"));

        let cands = vec![('A', "Sri Lanka".to_string()), ('B', "China".to_string())];
        let p = lib
            .render(
                ids::AGGREGATE,
                &PromptInput::Candidates {
                    question: "Who?",
                    candidates: &cands,
                },
            )
            .unwrap();
        assert!(p
            .user
            .ends_with("Question: Who?\nCandidate answer:\nsource A: Sri Lanka\nsource B: China\nOutput:"));
    }

    #[test]
    fn builtin_decomposition_examples_are_valid_json() {
        for t in PromptLibrary::builtin().templates.values() {
            if t.layout == PromptLayout::Decomposition {
                for ex in &t.few_shot_examples {
                    let v: serde_json::Value = serde_json::from_str(&ex.output).unwrap();
                    assert_eq!(v.as_object().unwrap().len(), 1, "{}", t.template_id);
                }
            }
        }
    }
}
