//! Loading and holding the temporal knowledge graph.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{TemporalOrder, TimeError, TimeStamp};

pub type FactId = u64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("invalid fact: {0}")]
    InvalidFact(String),
    #[error("unknown tkg format {0:?}")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactTime {
    Point { time: TimeStamp },
    Interval { start: TimeStamp, end: TimeStamp },
}

impl FactTime {
    pub fn interval(start: TimeStamp, end: TimeStamp) -> Result<Self, StoreError> {
        if start.compare(&end) == TemporalOrder::After {
            return Err(StoreError::InvalidFact(format!(
                "interval start {start} is after end {end}"
            )));
        }
        Ok(FactTime::Interval { start, end })
    }

    /// The start of the fact's validity; the point itself for point facts.
    pub fn anchor(&self) -> TimeStamp {
        match self {
            FactTime::Point { time } => *time,
            FactTime::Interval { start, .. } => *start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalFact {
    pub fact_id: FactId,
    pub subject: String,
    pub predicate: String,
    pub object: String,
    #[serde(flatten)]
    pub time: FactTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkgFormat {
    TsvQuadruple,
    TsvQuintuple,
    JsonLines,
}

impl FromStr for TkgFormat {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv-quadruple" | "tsv" => Ok(Self::TsvQuadruple),
            "tsv-quintuple" => Ok(Self::TsvQuintuple),
            "json-lines" | "jsonl" => Ok(Self::JsonLines),
            other => Err(StoreError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub duplicates: usize,
    pub skipped: Vec<SkippedLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedLine {
    pub line_no: usize,
    pub reason: String,
}

/// Immutable collection of facts plus the entity and predicate vocabularies.
#[derive(Debug, Clone, Default)]
pub struct TkgStore {
    facts: Vec<TemporalFact>,
    entities: BTreeSet<String>,
    predicates: BTreeSet<String>,
}

impl TkgStore {
    pub fn facts(&self) -> &[TemporalFact] {
        &self.facts
    }

    /// Fact ids are dense and assigned in load order.
    pub fn fact(&self, id: FactId) -> Option<&TemporalFact> {
        self.facts.get(id as usize)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn entities(&self) -> &BTreeSet<String> {
        &self.entities
    }

    pub fn predicates(&self) -> &BTreeSet<String> {
        &self.predicates
    }

    /// Serializes the store as JSON lines in fact-id order; reloading the
    /// output with [`TkgFormat::JsonLines`] reproduces the same ids.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for fact in &self.facts {
            let row = RawJsonFact::from(fact);
            out.push_str(&serde_json::to_string(&row).expect("fact serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct StoreBuilder {
    store: TkgStore,
    seen: HashSet<(String, String, String, FactTime)>,
    duplicates: usize,
}

impl StoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a fact, returning `false` when it duplicates an earlier one.
    pub fn push(&mut self, subject: &str, predicate: &str, object: &str, time: FactTime) -> Result<bool, StoreError> {
        for (name, value) in [("subject", subject), ("predicate", predicate), ("object", object)] {
            if value.trim().is_empty() {
                return Err(StoreError::InvalidFact(format!("empty {name}")));
            }
        }
        if let FactTime::Interval { start, end } = time {
            FactTime::interval(start, end)?;
        }
        let key = (subject.to_string(), predicate.to_string(), object.to_string(), time);
        if !self.seen.insert(key) {
            self.duplicates += 1;
            return Ok(false);
        }
        let fact_id = self.store.facts.len() as FactId;
        self.store.entities.insert(subject.to_string());
        self.store.entities.insert(object.to_string());
        self.store.predicates.insert(predicate.to_string());
        self.store.facts.push(TemporalFact {
            fact_id,
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
            time,
        });
        Ok(true)
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn build(self) -> TkgStore {
        self.store
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJsonFact {
    subject: String,
    predicate: String,
    object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end: Option<String>,
    #[serde(default, skip_serializing)]
    #[allow(dead_code)]
    fact_id: Option<u64>,
}

impl From<&TemporalFact> for RawJsonFact {
    fn from(fact: &TemporalFact) -> Self {
        let (time, start, end) = match fact.time {
            FactTime::Point { time } => (Some(time.to_string()), None, None),
            FactTime::Interval { start, end } => (None, Some(start.to_string()), Some(end.to_string())),
        };
        Self {
            subject: fact.subject.clone(),
            predicate: fact.predicate.clone(),
            object: fact.object.clone(),
            time,
            start,
            end,
            fact_id: None,
        }
    }
}

fn ts(text: &str) -> Result<TimeStamp, String> {
    TimeStamp::parse(text.trim()).map_err(|e: TimeError| e.to_string())
}

fn parse_line(line: &str, format: TkgFormat) -> Result<(String, String, String, FactTime), String> {
    match format {
        TkgFormat::TsvQuadruple | TkgFormat::TsvQuintuple => {
            let cols: Vec<&str> = line.split('\t').collect();
            let want = if format == TkgFormat::TsvQuadruple { 4 } else { 5 };
            if cols.len() != want {
                return Err(format!("expected {want} tab-separated columns, found {}", cols.len()));
            }
            let time = if want == 4 {
                FactTime::Point { time: ts(cols[3])? }
            } else {
                FactTime::interval(ts(cols[3])?, ts(cols[4])?).map_err(|e| e.to_string())?
            };
            Ok((cols[0].to_string(), cols[1].to_string(), cols[2].to_string(), time))
        }
        TkgFormat::JsonLines => {
            let raw: RawJsonFact = serde_json::from_str(line).map_err(|e| e.to_string())?;
            let time = match (raw.time.as_deref(), raw.start.as_deref(), raw.end.as_deref()) {
                (Some(t), None, None) => FactTime::Point { time: ts(t)? },
                (None, Some(s), Some(e)) => FactTime::interval(ts(s)?, ts(e)?).map_err(|e| e.to_string())?,
                _ => return Err("expected either `time` or both `start` and `end`".to_string()),
            };
            Ok((raw.subject, raw.predicate, raw.object, time))
        }
    }
}

/// Parses facts from in-memory text. Blank lines are ignored.
pub fn parse_tkg(text: &str, format: TkgFormat, lenient: bool) -> Result<(TkgStore, LoadReport), StoreError> {
    let mut builder = StoreBuilder::new();
    let mut report = LoadReport::default();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() {
            continue;
        }
        let parsed =
            parse_line(line, format).and_then(|(s, p, o, t)| builder.push(&s, &p, &o, t).map_err(|e| e.to_string()));
        match parsed {
            Ok(true) => report.loaded += 1,
            Ok(false) => {}
            Err(reason) if lenient => {
                log::warn!("skipping line {line_no}: {reason}");
                report.skipped.push(SkippedLine { line_no, reason });
            }
            Err(reason) => return Err(StoreError::MalformedLine { line_no, reason }),
        }
    }
    report.duplicates = builder.duplicates();
    Ok((builder.build(), report))
}

pub fn load_tkg(
    path: impl AsRef<Path>,
    format: TkgFormat,
    lenient: bool,
) -> Result<(TkgStore, LoadReport), StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tkg(&text, format, lenient)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_tsv_quadruple() {
        let (store, report) = parse_tkg(
            "Georgios Papandreou\tMake a visit\tChina\t2009-05-12\n",
            TkgFormat::TsvQuadruple,
            false,
        )
        .unwrap();
        assert_eq!(report.loaded, 1);
        let fact = &store.facts()[0];
        assert_eq!(fact.subject, "Georgios Papandreou");
        assert_eq!(fact.predicate, "Make a visit");
        assert_eq!(fact.object, "China");
        assert_eq!(
            fact.time,
            FactTime::Point {
                time: TimeStamp::parse("2009-05-12").unwrap()
            }
        );
        assert!(store.entities().contains("China"));
        assert!(store.predicates().contains("Make a visit"));
    }

    #[test]
    fn empty_input_gives_empty_store() {
        let (store, report) = parse_tkg("", TkgFormat::TsvQuadruple, false).unwrap();
        assert!(store.is_empty());
        assert!(store.entities().is_empty());
        assert_eq!(report.loaded, 0);
    }

    #[test]
    fn deduplicates_identical_lines() {
        let line = "A\tr\tB\t2001-02\n";
        let (store, report) = parse_tkg(&format!("{line}{line}"), TkgFormat::TsvQuadruple, false).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(report.duplicates, 1);
    }

    #[test]
    fn malformed_line_is_fatal_unless_lenient() {
        let text = "A\tr\tB\t2001\nbroken line\nC\tr\tD\t2009-13\nE\tr\tF\t2002\n";
        match parse_tkg(text, TkgFormat::TsvQuadruple, false) {
            Err(StoreError::MalformedLine { line_no, .. }) => assert_eq!(line_no, 2),
            other => panic!("unexpected {other:?}"),
        }
        let (store, report) = parse_tkg(text, TkgFormat::TsvQuadruple, true).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(report.skipped.iter().map(|s| s.line_no).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn quintuple_and_json_lines() {
        let (store, _) = parse_tkg("A\tr\tB\t2001\t2003\n", TkgFormat::TsvQuintuple, false).unwrap();
        assert!(matches!(store.facts()[0].time, FactTime::Interval { .. }));
        assert!(parse_tkg("A\tr\tB\t2004\t2003\n", TkgFormat::TsvQuintuple, false).is_err());

        let jsonl = r#"{"subject":"A","predicate":"r","object":"B","time":"2001-02-03"}
{"subject":"A","predicate":"r","object":"B","start":"2001","end":"2003"}
"#;
        let (store, _) = parse_tkg(jsonl, TkgFormat::JsonLines, false).unwrap();
        assert_eq!(store.len(), 2);
        let bad = r#"{"subject":"A","predicate":"r","object":"B","time":"2001","start":"2001","end":"2002"}"#;
        assert!(parse_tkg(bad, TkgFormat::JsonLines, false).is_err());
    }

    #[test]
    fn json_lines_export_reloads_identically() {
        let text = "A\tr\tB\t2001\nC\ts\tD\t2002-03-04\n";
        let (store, _) = parse_tkg(text, TkgFormat::TsvQuadruple, false).unwrap();
        let (reloaded, _) = parse_tkg(&store.to_json_lines(), TkgFormat::JsonLines, false).unwrap();
        assert_eq!(store.facts(), reloaded.facts());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_tkg("/nonexistent/facts.tsv", TkgFormat::TsvQuadruple, false),
            Err(StoreError::Io { .. })
        ));
    }
}
