use std::sync::LazyLock;

use regex::Regex;

use super::{Answer, AnswerValue};
use crate::time::{compare_timestamps, parse_timestamp, TemporalOrder, TimeStamp};

static BOUND: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(before|after)\s+(\d{4}(?:-\d{2}){0,2})\b").unwrap());

/// Times in `answer` that contradict an explicit "before X" or "after X" in
/// `question`. Only definite contradictions count; a value that merely
/// overlaps the bound at a coarser granularity is let through.
pub fn temporal_violations(question: &str, answer: &Answer) -> Vec<String> {
    let bounds: Vec<(bool, TimeStamp)> = BOUND
        .captures_iter(question)
        .filter_map(|c| Some((c[1].eq_ignore_ascii_case("before"), parse_timestamp(&c[2]).ok()?)))
        .collect();
    if bounds.is_empty() {
        return Vec::new();
    }
    let times: Vec<(String, &TimeStamp)> = match &answer.value {
        AnswerValue::Timestamp(t) => vec![(t.to_string(), t)],
        AnswerValue::EntityTimeList(items) => items
            .iter()
            .map(|e| (format!("{} {}", e.entity, e.time), &e.time))
            .collect(),
        _ => Vec::new(),
    };
    let mut out = Vec::new();
    for (label, t) in &times {
        for (before, bound) in &bounds {
            let order = compare_timestamps(t, bound);
            let wrong = if *before {
                order == TemporalOrder::After || *t == bound
            } else {
                order == TemporalOrder::Before || *t == bound
            };
            if wrong {
                let word = if *before { "before" } else { "after" };
                out.push(format!("{label} is not {word} {bound}"));
            }
        }
    }
    out
}
