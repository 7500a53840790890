//! Recent-behaviour context for RAG prompts.
//!
//! Instance granularity retrieves successors of the queried pair only, by
//! raw frequency or by frequency increase against a baseline window. Global
//! granularity returns the most frequent triples of the whole window,
//! independent of the query.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterId, PairKey, TransitionTriple};
use crate::stats::{frequency_delta, ranked_successors, FrequencyWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    #[default]
    Frequency,
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Instance,
    Global,
}

/// Retrieval defaults carried by pipeline configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalSettings {
    pub granularity: Granularity,
    pub mode: RetrievalMode,
    pub n: usize,
    /// Days of data aggregated into the "recent" window.
    pub window_days: u32,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        RetrievalSettings {
            granularity: Granularity::Instance,
            mode: RetrievalMode::Frequency,
            n: 1,
            window_days: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalQuery {
    pub pair: PairKey,
    pub mode: RetrievalMode,
    pub n: usize,
}

impl RetrievalQuery {
    pub fn new(pair: PairKey, mode: RetrievalMode, n: usize) -> Result<Self, RetrievalError> {
        if n == 0 {
            return Err(RetrievalError::ZeroN);
        }
        Ok(RetrievalQuery { pair, mode, n })
    }

    pub fn frequency(pair: PairKey, n: usize) -> Result<Self, RetrievalError> {
        Self::new(pair, RetrievalMode::Frequency, n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetrievedCluster {
    pub cluster: ClusterId,
    /// Count in frequency mode, positive count increase in trend mode.
    pub score: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetrievalResult {
    pub pair: PairKey,
    pub items: Vec<RetrievedCluster>,
    pub mode: RetrievalMode,
    pub window_id: u32,
}

impl RetrievalResult {
    pub fn clusters(&self) -> Vec<ClusterId> {
        self.items.iter().map(|i| i.cluster.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalError {
    #[error("trend retrieval needs a baseline window")]
    MissingBaseline,
    #[error("number of retrieved clusters must be at least 1")]
    ZeroN,
}

pub fn retrieve_instance(
    recent: &FrequencyWindow,
    previous: Option<&FrequencyWindow>,
    q: &RetrievalQuery,
) -> Result<RetrievalResult, RetrievalError> {
    let items = match q.mode {
        RetrievalMode::Frequency => ranked_successors(recent, &q.pair)
            .into_iter()
            .take(q.n)
            .map(|(cluster, count)| RetrievedCluster {
                cluster,
                score: count as i64,
            })
            .collect(),
        RetrievalMode::Trend => {
            let previous = previous.ok_or(RetrievalError::MissingBaseline)?;
            if recent.successors(&q.pair).is_none() {
                Vec::new()
            } else {
                let mut rising: Vec<RetrievedCluster> = frequency_delta(previous, recent, &q.pair)
                    .into_iter()
                    .filter(|&(_, d)| d > 0)
                    .map(|(cluster, score)| RetrievedCluster { cluster, score })
                    .collect();
                // delta map iterates id-ascending; stable sort keeps that on ties
                rising.sort_by_key(|r| std::cmp::Reverse(r.score));
                rising.truncate(q.n);
                rising
            }
        }
    };
    Ok(RetrievalResult {
        pair: q.pair.clone(),
        items,
        mode: q.mode,
        window_id: recent.window_id,
    })
}

/// Top-`n` `(pair, next)` entries across the whole window by count, ties by
/// `(first, second, next)` ascending.
pub fn retrieve_global(recent: &FrequencyWindow, n: usize) -> Vec<(TransitionTriple, u64)> {
    let mut all: Vec<(TransitionTriple, u64)> = recent
        .entries()
        .map(|(p, c, count)| {
            (
                TransitionTriple {
                    pair: p.clone(),
                    next: c.clone(),
                },
                count,
            )
        })
        .collect();
    all.sort_by_key(|e| std::cmp::Reverse(e.1));
    all.truncate(n);
    all
}
