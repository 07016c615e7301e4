use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::llm::template_ids;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Equal,
    BeforeAfter,
    FirstLast,
    EqualMulti,
    BeforeLast,
    AfterFirst,
    TimelineSimple,
    TimelineMedium,
    TimelineComplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Complexity {
    Single,
    Multiple,
    Simple,
    Medium,
    Complex,
}

impl Complexity {
    pub fn label(self) -> &'static str {
        match self {
            Complexity::Single => "Single",
            Complexity::Multiple => "Multiple",
            Complexity::Simple => "Simple",
            Complexity::Medium => "Medium",
            Complexity::Complex => "Complex",
        }
    }
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::Equal,
        Category::BeforeAfter,
        Category::FirstLast,
        Category::EqualMulti,
        Category::BeforeLast,
        Category::AfterFirst,
        Category::TimelineSimple,
        Category::TimelineMedium,
        Category::TimelineComplex,
    ];

    pub fn complexity(self) -> Complexity {
        match self {
            Category::Equal | Category::BeforeAfter | Category::FirstLast => Complexity::Single,
            Category::EqualMulti | Category::BeforeLast | Category::AfterFirst => Complexity::Multiple,
            Category::TimelineSimple => Complexity::Simple,
            Category::TimelineMedium => Complexity::Medium,
            Category::TimelineComplex => Complexity::Complex,
        }
    }

    /// Dataset-style label, e.g. `before_after`.
    pub fn label(self) -> &'static str {
        match self {
            Category::Equal => "equal",
            Category::BeforeAfter => "before_after",
            Category::FirstLast => "first_last",
            Category::EqualMulti => "equal_multi",
            Category::BeforeLast => "before_last",
            Category::AfterFirst => "after_first",
            Category::TimelineSimple => "timeline_simple",
            Category::TimelineMedium => "timeline_medium",
            Category::TimelineComplex => "timeline_complex",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::Equal => "Equal",
            Category::BeforeAfter => "Before/After",
            Category::FirstLast => "First/Last",
            Category::EqualMulti => "Equal Multi",
            Category::BeforeLast => "Before/Last",
            Category::AfterFirst => "After/First",
            Category::TimelineSimple => "Simple",
            Category::TimelineMedium => "Medium",
            Category::TimelineComplex => "Complex",
        }
    }

    pub fn template_id(self) -> &'static str {
        match self {
            Category::Equal => template_ids::DECOMPOSE_EQUAL,
            Category::BeforeAfter => template_ids::DECOMPOSE_BEFORE_AFTER,
            Category::FirstLast => template_ids::DECOMPOSE_FIRST_LAST,
            Category::EqualMulti => template_ids::DECOMPOSE_EQUAL_MULTI,
            Category::BeforeLast => template_ids::DECOMPOSE_BEFORE_LAST,
            Category::AfterFirst => template_ids::DECOMPOSE_AFTER_FIRST,
            Category::TimelineSimple | Category::TimelineMedium | Category::TimelineComplex => {
                template_ids::DECOMPOSE_TIMELINE
            }
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let cat = match key.as_str() {
            "equal" => Category::Equal,
            "before_after" | "beforeafter" => Category::BeforeAfter,
            "first_last" | "firstlast" => Category::FirstLast,
            "equal_multi" | "equalmulti" => Category::EqualMulti,
            "before_last" | "beforelast" => Category::BeforeLast,
            "after_first" | "afterfirst" => Category::AfterFirst,
            "timeline_simple" | "simple" => Category::TimelineSimple,
            "timeline_medium" | "medium" => Category::TimelineMedium,
            "timeline_complex" | "complex" => Category::TimelineComplex,
            _ => return Err(format!("unknown question type {s:?}")),
        };
        Ok(cat)
    }
}

/// A question category together with its complexity family. Serializes as
/// the category label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuestionType {
    pub category: Category,
    pub complexity: Complexity,
}

impl QuestionType {
    pub fn new(category: Category) -> Self {
        Self {
            category,
            complexity: category.complexity(),
        }
    }
}

impl From<Category> for QuestionType {
    fn from(c: Category) -> Self {
        Self::new(c)
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.category.label())
    }
}

impl FromStr for QuestionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Category>().map(Self::new)
    }
}

impl Serialize for QuestionType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.category.label())
    }
}

impl<'de> Deserialize<'de> for QuestionType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn has_word(words: &[&str], any_of: &[&str]) -> bool {
    words.iter().any(|w| any_of.contains(w))
}

/// A parseable dataset label wins; otherwise keyword cues decide, falling
/// back to `Equal`.
pub fn classify_question(question: &str, dataset_hint: Option<&str>) -> QuestionType {
    if let Some(hint) = dataset_hint {
        match hint.parse::<QuestionType>() {
            Ok(t) => return t,
            Err(e) => log::warn!("{e}; classifying by keywords instead"),
        }
    }
    let lower = question.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    let before = has_word(&words, &["before", "prior"]);
    let after = has_word(&words, &["after", "following"]);
    let first_last = has_word(&words, &["first", "last", "earliest", "latest", "final"]);
    let same = words
        .windows(2)
        .any(|w| w[0] == "same" && matches!(w[1], "day" | "month" | "year" | "time"));

    let category = match (before || after, first_last) {
        (true, true) if before => Category::BeforeLast,
        (true, true) => Category::AfterFirst,
        (true, false) => Category::BeforeAfter,
        (false, true) => Category::FirstLast,
        (false, false) if same => Category::EqualMulti,
        (false, false) => Category::Equal,
    };
    QuestionType::new(category)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_examples() {
        let q = "Before Kuwait, which country received the Government Delegation of North Korea's visit last?";
        assert_eq!(classify_question(q, None).category, Category::BeforeLast);
        assert_eq!(
            classify_question("Who visited France in 2009-05?", None).category,
            Category::Equal
        );
        assert_eq!(
            classify_question("Who negotiated with Colombia before 2010-12-22?", None).category,
            Category::BeforeAfter
        );
        assert_eq!(
            classify_question(
                "After the Ministry of Japan, who was the first to criticize China?",
                None
            )
            .category,
            Category::AfterFirst
        );
        assert_eq!(
            classify_question("When did Qatar last negotiate with Iran?", None).category,
            Category::FirstLast
        );
        assert_eq!(
            classify_question("In the same month as Iran accused Israel, who praised Japan?", None).category,
            Category::EqualMulti
        );
        // "lastly" is not "last"
        assert_eq!(
            classify_question("Who lastly praised Japan?", None).category,
            Category::Equal
        );
    }

    #[test]
    fn hint_is_used_verbatim() {
        let t = classify_question("Who was the first to visit Kuwait?", Some("equal_multi"));
        assert_eq!(t, QuestionType::new(Category::EqualMulti));
        assert_eq!(t.complexity, Complexity::Multiple);
        // unparseable hints fall back to keywords
        assert_eq!(
            classify_question("Who was the first?", Some("???")).category,
            Category::FirstLast
        );
    }

    #[test]
    fn complexity_families() {
        for c in [Category::Equal, Category::BeforeAfter, Category::FirstLast] {
            assert_eq!(c.complexity(), Complexity::Single);
        }
        for c in [Category::EqualMulti, Category::BeforeLast, Category::AfterFirst] {
            assert_eq!(c.complexity(), Complexity::Multiple);
        }
    }

    #[test]
    fn labels_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.label().parse::<Category>().unwrap(), c);
            let t = QuestionType::new(c);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<QuestionType>(&json).unwrap(), t);
        }
        assert_eq!("Before-After".parse::<Category>().unwrap(), Category::BeforeAfter);
    }
}
