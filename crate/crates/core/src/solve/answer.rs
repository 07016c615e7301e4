use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::time::TimeStamp;

pub const ANSWER_ANCHOR: &str = "So the answer is:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTime {
    pub entity: String,
    pub time: TimeStamp,
}

impl EntityTime {
    pub fn new(entity: impl Into<String>, time: TimeStamp) -> Self {
        Self {
            entity: entity.into(),
            time,
        }
    }
}

impl fmt::Display for EntityTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.entity, self.time)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum AnswerValue {
    Entity(String),
    Timestamp(TimeStamp),
    EntityTimeList(Vec<EntityTime>),
    Unknown,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerSource {
    #[serde(rename = "IR")]
    Ir,
    Child,
    Aggregated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    #[serde(flatten)]
    pub value: AnswerValue,
    pub source: AnswerSource,
    /// Full reasoning text, or the error message for `Error` answers.
    #[serde(default)]
    pub chain: String,
}

impl Answer {
    pub fn new(value: AnswerValue, source: AnswerSource, chain: impl Into<String>) -> Self {
        Self {
            value,
            source,
            chain: chain.into(),
        }
    }

    pub fn unknown(source: AnswerSource) -> Self {
        Self::new(AnswerValue::Unknown, source, "")
    }

    pub fn error(source: AnswerSource, message: impl Into<String>) -> Self {
        Self::new(AnswerValue::Error, source, message)
    }

    pub fn with_source(mut self, source: AnswerSource) -> Self {
        self.source = source;
        self
    }

    /// False for `Unknown`/`Error` kinds and for entities spelled that way.
    pub fn is_valid(&self) -> bool {
        match &self.value {
            AnswerValue::Unknown | AnswerValue::Error => false,
            AnswerValue::Entity(s) => {
                let s = s.trim();
                !(s.eq_ignore_ascii_case("unknown") || s.eq_ignore_ascii_case("error"))
            }
            AnswerValue::EntityTimeList(items) => !items.is_empty(),
            AnswerValue::Timestamp(_) => true,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.value {
            AnswerValue::Entity(_) => "entity",
            AnswerValue::Timestamp(_) => "timestamp",
            AnswerValue::EntityTimeList(_) => "entity_time_list",
            AnswerValue::Unknown => "unknown",
            AnswerValue::Error => "error",
        }
    }

    /// Items as they appear in a relevant-facts list: one per pair, or the
    /// whole rendered value.
    pub fn fact_items(&self) -> Vec<String> {
        match &self.value {
            AnswerValue::EntityTimeList(items) => items.iter().map(ToString::to_string).collect(),
            _ => vec![self.render()],
        }
    }

    /// Entity `A`, timestamp `2009-05-12`, list `[A 2009-05-08], [B 2009-05-07]`.
    pub fn render(&self) -> String {
        render_value(&self.value)
    }
}

pub fn render_value(value: &AnswerValue) -> String {
    match value {
        AnswerValue::Entity(s) => s.clone(),
        AnswerValue::Timestamp(t) => t.to_string(),
        AnswerValue::EntityTimeList(items) => items.iter().map(|p| format!("[{p}]")).collect::<Vec<_>>().join(", "),
        AnswerValue::Unknown => "Unknown".into(),
        AnswerValue::Error => "Error".into(),
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

static ANCHOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)so\s+the\s+answer\s+is\s*:").unwrap());
static BRACKET_GROUP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());

/// `"Wen Jiabao 2009-05-08"` split at the last space into a pair.
fn entity_time(text: &str) -> Option<EntityTime> {
    let text = text.trim().trim_matches(|c| c == '"' || c == '\'').trim();
    let (entity, time) = text.rsplit_once(char::is_whitespace)?;
    let entity = entity.trim().trim_end_matches([',', ':']).trim();
    if entity.is_empty() {
        return None;
    }
    let time = TimeStamp::parse(time.trim().trim_end_matches(['.', ','])).ok()?;
    Some(EntityTime::new(entity, time))
}

fn strip_wrapping(s: &str) -> &str {
    let mut s = s.trim();
    loop {
        let before = s;
        s = s.trim_end_matches('.').trim();
        for (open, close) in [('"', '"'), ('\'', '\''), ('`', '`'), ('*', '*')] {
            if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
                s = s[1..s.len() - 1].trim();
            }
        }
        if s == before {
            return s;
        }
    }
}

/// Interprets the text after an answer anchor by shape.
pub fn parse_answer_value(raw: &str) -> AnswerValue {
    let text = strip_wrapping(raw);
    let lower = text.to_ascii_lowercase();
    if matches!(lower.as_str(), "" | "unknown" | "none" | "n/a") {
        return AnswerValue::Unknown;
    }
    if lower == "error" {
        return AnswerValue::Error;
    }
    if let Ok(t) = TimeStamp::parse(text) {
        return AnswerValue::Timestamp(t);
    }
    if let Ok(items) = serde_json::from_str::<Vec<String>>(text) {
        let pairs: Option<Vec<EntityTime>> = items.iter().map(|s| entity_time(s)).collect();
        match pairs {
            Some(p) if !p.is_empty() => return AnswerValue::EntityTimeList(p),
            _ if items.len() == 1 => return parse_answer_value(&items[0]),
            _ => {}
        }
    }
    let groups: Vec<&str> = BRACKET_GROUP
        .captures_iter(text)
        .map(|c| c.get(1).unwrap().as_str())
        .collect();
    if !groups.is_empty() {
        let pairs: Option<Vec<EntityTime>> = groups.iter().map(|g| entity_time(g)).collect();
        if let Some(p) = pairs {
            return AnswerValue::EntityTimeList(p);
        }
        if groups.len() == 1 && text.starts_with('[') && text.ends_with(']') {
            return parse_answer_value(groups[0]);
        }
    }
    if let Some(pair) = entity_time(text) {
        return AnswerValue::EntityTimeList(vec![pair]);
    }
    AnswerValue::Entity(text.to_string())
}

/// Parses the text after the last "So the answer is:" (case-insensitive).
/// Without the anchor the answer is `Unknown`; the whole response is kept
/// as the chain either way.
pub fn parse_answer(response: &str, source: AnswerSource) -> Answer {
    let value = match ANCHOR.find_iter(response).last() {
        Some(m) => {
            let tail = response[m.end()..].trim();
            // trailing commentary after a blank line is not part of the answer
            let tail = tail.split("\n\n").next().unwrap_or(tail);
            parse_answer_value(tail)
        }
        None => AnswerValue::Unknown,
    };
    Answer::new(value, source, response)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> TimeStamp {
        TimeStamp::parse(s).unwrap()
    }

    #[test]
    fn published_transcripts() {
        let a = parse_answer(
            "The rejection event occurred on 2008-09-23, so the year is 2008. So the answer is: 2008.",
            AnswerSource::Ir,
        );
        assert_eq!(a.value, AnswerValue::Timestamp(ts("2008")));
        assert_eq!(a.render(), "2008");

        let a = parse_answer(
            "So the answer is: [Stephen W. Bosworth 2009-05-08], [Wen Jiabao 2009-05-08]",
            AnswerSource::Ir,
        );
        assert_eq!(
            a.value,
            AnswerValue::EntityTimeList(vec![
                EntityTime::new("Stephen W. Bosworth", ts("2009-05-08")),
                EntityTime::new("Wen Jiabao", ts("2009-05-08")),
            ])
        );
        assert_eq!(a.render(), "[Stephen W. Bosworth 2009-05-08], [Wen Jiabao 2009-05-08]");

        let a = parse_answer("... So the answer is: Vietnam 2008-04-30.", AnswerSource::Ir);
        assert_eq!(a.render(), "[Vietnam 2008-04-30]");

        let a = parse_answer("So the answer is: House of Representatives (Uruguay)", AnswerSource::Ir);
        assert_eq!(
            a.value,
            AnswerValue::Entity("House of Representatives (Uruguay)".into())
        );
    }

    #[test]
    fn missing_anchor_is_unknown_and_keeps_text() {
        let a = parse_answer("I think it was China.", AnswerSource::Ir);
        assert_eq!(a.value, AnswerValue::Unknown);
        assert_eq!(a.chain, "I think it was China.");
        assert!(!a.is_valid());
    }

    #[test]
    fn last_anchor_wins_and_case_is_ignored() {
        let a = parse_answer("so the answer is: A. Wait. SO THE ANSWER IS: B", AnswerSource::Ir);
        assert_eq!(a.value, AnswerValue::Entity("B".into()));
    }

    #[test]
    fn literal_markers() {
        assert_eq!(parse_answer_value("Unknown."), AnswerValue::Unknown);
        assert_eq!(parse_answer_value("\"Error\""), AnswerValue::Error);
        assert_eq!(
            parse_answer_value("[Wen Jiabao]"),
            AnswerValue::Entity("Wen Jiabao".into())
        );
        assert_eq!(
            parse_answer_value(r#"["China 2006-01-20", "Vietnam 2008-04-30"]"#),
            AnswerValue::EntityTimeList(vec![
                EntityTime::new("China", ts("2006-01-20")),
                EntityTime::new("Vietnam", ts("2008-04-30"))
            ])
        );
        let e = Answer::new(AnswerValue::Entity("unknown".into()), AnswerSource::Ir, "");
        assert!(!e.is_valid());
    }

    #[test]
    fn serde_shape() {
        let a = Answer::new(AnswerValue::Timestamp(ts("2009-05-12")), AnswerSource::Ir, "c");
        let v = serde_json::to_value(&a).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"kind": "timestamp", "value": "2009-05-12", "source": "IR", "chain": "c"})
        );
        assert_eq!(serde_json::from_value::<Answer>(v).unwrap(), a);

        let u = Answer::unknown(AnswerSource::Child);
        let v = serde_json::to_value(&u).unwrap();
        assert!(v.get("value").is_none());
        assert_eq!(serde_json::from_value::<Answer>(v).unwrap(), u);

        let l = parse_answer("So the answer is: [A 2001], [B 2002-03]", AnswerSource::Aggregated);
        let back: Answer = serde_json::from_str(&serde_json::to_string(&l).unwrap()).unwrap();
        assert_eq!(back, l);
    }
}
