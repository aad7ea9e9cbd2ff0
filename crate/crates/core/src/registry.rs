//! Name-keyed registries of interchangeable strategies.
//!
//! Each pipeline stage that has more than one algorithm (depth sampling,
//! prefiltering, morphology) exposes a trait; implementations register under
//! a stable name and are chosen at runtime from config, the CLI, or the wire.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub trait Strategy: Send + Sync {
    fn name(&self) -> &'static str;
}

pub struct Registry<T: ?Sized + Strategy> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Arc<T>>,
}

impl<T: ?Sized + Strategy> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `strategy` under its own name, replacing any previous entry.
    pub fn register(&mut self, strategy: Arc<T>) -> &mut Self {
        self.entries.insert(strategy.name(), strategy);
        self
    }

    pub fn with(mut self, strategy: Arc<T>) -> Self {
        self.register(strategy);
        self
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

impl<T: ?Sized + Strategy> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.names())
            .finish()
    }
}
