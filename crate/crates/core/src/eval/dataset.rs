use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::store::FactId;
use crate::time::Granularity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Entity,
    Time,
}

impl AnswerType {
    pub fn label(self) -> &'static str {
        match self {
            AnswerType::Entity => "Entity",
            AnswerType::Time => "Time",
        }
    }
}

/// One line of a question file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub question_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
    pub answer_type: AnswerType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_level: Option<Granularity>,
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_fact_ids: Option<Vec<FactId>>,
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetItem>, EvalError> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let item: DatasetItem = serde_json::from_str(line).map_err(|e| EvalError::BadDataset {
            line_no: i + 1,
            reason: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetItem>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

pub fn dataset_to_json_lines(items: &[DatasetItem]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("dataset item serializes"));
        out.push('\n');
    }
    out
}
