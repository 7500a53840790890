//! Versioned in-memory transition-table store.
//!
//! Readers load the current version through an atomic pointer and answer
//! from that one `Arc<TableVersion>`, so a lookup never straddles two
//! versions. Publishing is serialized by the history lock.

use std::sync::{Arc, Mutex};

use arc_swap::ArcSwapOption;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterId, PairKey};
use crate::pipeline::TableVersion;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cluster", rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    None,
    GlobalTop(ClusterId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookupSource {
    Entry,
    Fallback,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupResult {
    pub prediction: Option<ClusterId>,
    /// Version that answered; 0 before anything has been published.
    pub version_id: u64,
    pub source: LookupSource,
}

/// Lookup against one specific table.
pub fn lookup_in(table: &TableVersion, pair: &PairKey, fallback: &Fallback) -> LookupResult {
    resolve(table.entries.get(pair), table.version_id, fallback)
}

fn resolve(entry: Option<&ClusterId>, version_id: u64, fallback: &Fallback) -> LookupResult {
    match (entry, fallback) {
        (Some(c), _) => LookupResult {
            prediction: Some(c.clone()),
            version_id,
            source: LookupSource::Entry,
        },
        (None, Fallback::GlobalTop(c)) => LookupResult {
            prediction: Some(c.clone()),
            version_id,
            source: LookupSource::Fallback,
        },
        (None, Fallback::None) => LookupResult {
            prediction: None,
            version_id,
            source: LookupSource::Miss,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PublishError {
    #[error("version {offered} does not follow current version {current}")]
    NonIncreasing { current: u64, offered: u64 },
    #[error("version {0} has no entries")]
    EmptyTable(u64),
}

pub struct TableStore {
    current: ArcSwapOption<TableVersion>,
    history: Mutex<Vec<u64>>,
    fallback: Fallback,
}

impl TableStore {
    pub fn new(fallback: Fallback) -> Self {
        TableStore {
            current: ArcSwapOption::empty(),
            history: Mutex::new(Vec::new()),
            fallback,
        }
    }

    pub fn with_table(table: TableVersion, fallback: Fallback) -> Result<Self, PublishError> {
        let store = Self::new(fallback);
        store.publish(table)?;
        Ok(store)
    }

    pub fn publish(&self, table: TableVersion) -> Result<u64, PublishError> {
        let mut history = self.history.lock().expect("history lock poisoned");
        if let Some(&current) = history.last() {
            if table.version_id <= current {
                return Err(PublishError::NonIncreasing {
                    current,
                    offered: table.version_id,
                });
            }
        }
        if table.entries.is_empty() {
            return Err(PublishError::EmptyTable(table.version_id));
        }
        let id = table.version_id;
        self.current.store(Some(Arc::new(table)));
        history.push(id);
        Ok(id)
    }

    /// The live version, pinned for as long as the caller holds it.
    pub fn pin(&self) -> Option<Arc<TableVersion>> {
        self.current.load_full()
    }

    pub fn lookup(&self, pair: &PairKey) -> LookupResult {
        let guard = self.current.load();
        match guard.as_deref() {
            Some(table) => lookup_in(table, pair, &self.fallback),
            None => resolve(None, 0, &self.fallback),
        }
    }

    /// Answers every pair from the same version.
    pub fn lookup_many(&self, pairs: &[PairKey]) -> Vec<LookupResult> {
        let pinned = self.pin();
        pairs
            .iter()
            .map(|p| match pinned.as_deref() {
                Some(table) => lookup_in(table, p, &self.fallback),
                None => resolve(None, 0, &self.fallback),
            })
            .collect()
    }

    pub fn history(&self) -> Vec<u64> {
        self.history.lock().expect("history lock poisoned").clone()
    }

    pub fn current_version(&self) -> Option<u64> {
        self.current.load().as_ref().map(|t| t.version_id)
    }

    pub fn fallback(&self) -> &Fallback {
        &self.fallback
    }
}
