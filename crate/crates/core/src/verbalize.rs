//! Turns facts into plain statements for embedding and prompt context.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::store::{FactId, FactTime, StoreError, TemporalFact, TkgStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbalizedFact {
    pub fact_id: FactId,
    pub text: String,
}

/// Renders facts as `<s> <p> <o> in <t>` or `<s> <p> <o> from <a> to <b>`.
///
/// Predicates are emitted verbatim unless a surface form is registered for
/// them, e.g. `"Make a visit" -> "made a visit to"`.
#[derive(Debug, Clone, Default)]
pub struct Verbalizer {
    surface_forms: HashMap<String, String>,
}

impl Verbalizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_surface_forms(surface_forms: HashMap<String, String>) -> Self {
        Self { surface_forms }
    }

    /// Loads a JSON object mapping predicate to rendered phrase.
    pub fn from_surface_form_file(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let forms: HashMap<String, String> =
            serde_json::from_str(&text).map_err(|e| StoreError::InvalidFact(format!("surface form map: {e}")))?;
        Ok(Self::with_surface_forms(forms))
    }

    pub fn verbalize(&self, fact: &TemporalFact) -> VerbalizedFact {
        let predicate = self
            .surface_forms
            .get(&fact.predicate)
            .map(String::as_str)
            .unwrap_or(&fact.predicate);
        let text = match fact.time {
            FactTime::Point { time } => format!("{} {} {} in {}", fact.subject, predicate, fact.object, time),
            FactTime::Interval { start, end } => {
                format!(
                    "{} {} {} from {} to {}",
                    fact.subject, predicate, fact.object, start, end
                )
            }
        };
        VerbalizedFact {
            fact_id: fact.fact_id,
            text,
        }
    }

    pub fn verbalize_store(&self, store: &TkgStore) -> Vec<VerbalizedFact> {
        store.facts().iter().map(|f| self.verbalize(f)).collect()
    }
}

pub fn verbalize(fact: &TemporalFact) -> VerbalizedFact {
    Verbalizer::new().verbalize(fact)
}

pub fn verbalize_store(store: &TkgStore) -> Vec<VerbalizedFact> {
    Verbalizer::new().verbalize_store(store)
}
