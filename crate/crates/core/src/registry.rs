//! Name-keyed factories for the pluggable strategies (embedders, index
//! backends, chat backends, aggregation modes).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} {name:?}; registered: {}", available.join(", "))]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub name: String,
    pub available: Vec<String>,
}

type Factory<C, T, E> = Box<dyn Fn(&C) -> Result<T, E> + Send + Sync>;

/// Maps a strategy name to a constructor taking a config value `C`.
pub struct Registry<C, T, E> {
    kind: &'static str,
    factories: BTreeMap<String, Factory<C, T, E>>,
}

impl<C, T, E> Registry<C, T, E>
where
    E: From<UnknownStrategy>,
{
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            factories: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(&C) -> Result<T, E> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
        self
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, config: &C) -> Result<T, E> {
        match self.factories.get(name) {
            Some(factory) => factory(config),
            None => Err(UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names(),
            }
            .into()),
        }
    }
}

impl<C, T, E> fmt::Debug for Registry<C, T, E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("names", &self.factories.keys().collect::<Vec<_>>())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn creates_registered_and_reports_unknown() {
        let mut reg: Registry<u32, u32, UnknownStrategy> = Registry::new("doubler");
        reg.register("double", |x| Ok(x * 2));
        assert_eq!(reg.create("double", &21).unwrap(), 42);
        let err = reg.create("triple", &1).unwrap_err();
        assert_eq!(err.available, vec!["double".to_string()]);
        assert!(err.to_string().contains("triple"));
    }
}
