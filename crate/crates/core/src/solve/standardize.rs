use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use thiserror::Error;

use super::Answer;
use crate::decompose::placeholder_regex;
use crate::time::TimeStamp;

const MONTH: &str = r"(January|February|March|April|May|June|July|August|September|October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sept|Sep|Oct|Nov|Dec)";

// day-first, month-first and month-year forms; alternation order matters
// because month-first and month-year share a starting position
static TIME_PHRASE: LazyLock<Regex> = LazyLock::new(|| {
    let ord = r"(?:st|nd|rd|th)?";
    let pattern = format!(
        r"(?i)\b(?:(?P<d1>\d{{1,2}}){ord}\s+(?:of\s+)?{m1}\.?,?\s+(?P<y1>\d{{4}})|{m2}\.?\s+(?P<d2>\d{{1,2}}){ord},?\s+(?P<y2>\d{{4}})|{m3}\.?,?\s+(?P<y3>\d{{4}}))\b",
        m1 = MONTH.replace('(', "(?P<m1>"),
        m2 = MONTH.replace('(', "(?P<m2>"),
        m3 = MONTH.replace('(', "(?P<m3>"),
    );
    Regex::new(&pattern).unwrap()
});

fn month_number(name: &str) -> Option<u8> {
    let lower = name.to_ascii_lowercase();
    let n = match lower.get(..3)? {
        "jan" => 1,
        "feb" => 2,
        "mar" => 3,
        "apr" => 4,
        "may" => 5,
        "jun" => 6,
        "jul" => 7,
        "aug" => 8,
        "sep" => 9,
        "oct" => 10,
        "nov" => 11,
        "dec" => 12,
        _ => return None,
    };
    Some(n)
}

fn rewrite(caps: &Captures, haystack: &str) -> Option<String> {
    let whole = caps.get(0)?;
    // "April 2011-05" and similar are left alone
    if haystack[whole.end()..].starts_with(['-', '/']) {
        return None;
    }
    let (day, month, year) = if let Some(m) = caps.name("m1") {
        (caps.name("d1"), m, caps.name("y1")?)
    } else if let Some(m) = caps.name("m2") {
        (caps.name("d2"), m, caps.name("y2")?)
    } else {
        (None, caps.name("m3")?, caps.name("y3")?)
    };
    let year: u16 = year.as_str().parse().ok()?;
    let month = month_number(month.as_str())?;
    let ts = match day {
        Some(d) => TimeStamp::ymd(year, month, d.as_str().parse().ok()?),
        None => TimeStamp::year_month(year, month),
    }
    .ok()?;
    Some(ts.to_string())
}

fn standardize_once(text: &str) -> String {
    TIME_PHRASE
        .replace_all(text, |caps: &Captures| {
            rewrite(caps, text).unwrap_or_else(|| caps[0].to_string())
        })
        .into_owned()
}

/// Rewrites natural-language dates ("7 July 2007", "July 7, 2007",
/// "January 2010") to ISO prefix form at their own granularity. Text with no
/// recognizable date, or an impossible one, comes back unchanged.
pub fn standardize_time(text: &str) -> String {
    let mut current = text.to_string();
    for _ in 0..8 {
        let next = standardize_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlaceholderError {
    #[error("no answer available for placeholder #{0}")]
    MissingPlaceholderAnswer(usize),
}

/// Replaces each `#j` with the rendered answer of sibling `j` (1-based).
pub fn replace_placeholders(
    question: &str,
    prior_answers: &BTreeMap<usize, Answer>,
) -> Result<String, PlaceholderError> {
    let re = placeholder_regex();
    for caps in re.captures_iter(question) {
        let j: usize = caps[1].parse().unwrap_or(usize::MAX);
        if !prior_answers.contains_key(&j) {
            return Err(PlaceholderError::MissingPlaceholderAnswer(j));
        }
    }
    Ok(re
        .replace_all(question, |caps: &Captures| {
            let j: usize = caps[1].parse().unwrap_or(usize::MAX);
            prior_answers[&j].render()
        })
        .into_owned())
}
