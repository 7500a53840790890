//! Interaction logs to per-user watch sequences to transition triples.

use std::collections::BTreeMap;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterId, ClusterVocabulary, InteractionEvent, TransitionTriple, WatchSequence};

/// Events collected for one day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventBatch {
    pub events: Vec<InteractionEvent>,
    pub source_day: u32,
}

impl EventBatch {
    pub fn new(events: Vec<InteractionEvent>, source_day: u32) -> Self {
        EventBatch { events, source_day }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("event #{index} (user {user_id:?}) references unknown cluster {cluster_id}")]
    UnknownCluster {
        index: usize,
        user_id: String,
        cluster_id: ClusterId,
    },
}

/// Groups positive events by user and orders them by timestamp. Ties keep
/// input order. Sequences come out sorted by user id.
pub fn build_sequences(
    batch: &EventBatch,
    vocab: &ClusterVocabulary,
) -> Result<Vec<WatchSequence>, IngestError> {
    let mut per_user: BTreeMap<&str, Vec<&InteractionEvent>> = BTreeMap::new();
    for (index, event) in batch.events.iter().enumerate() {
        if !vocab.contains(&event.cluster_id) {
            return Err(IngestError::UnknownCluster {
                index,
                user_id: event.user_id.clone(),
                cluster_id: event.cluster_id.clone(),
            });
        }
        if event.positive {
            per_user.entry(&event.user_id).or_default().push(event);
        }
    }

    Ok(per_user
        .into_iter()
        .map(|(user_id, mut events)| {
            // sort_by_key is stable
            events.sort_by_key(|e| e.timestamp);
            WatchSequence {
                user_id: user_id.to_string(),
                clusters: events.into_iter().map(|e| e.cluster_id.clone()).collect(),
            }
        })
        .collect())
}

/// Collapses runs of adjacent equal clusters.
pub fn collapse_repeats(clusters: &[ClusterId]) -> Vec<ClusterId> {
    let mut out: Vec<ClusterId> = Vec::with_capacity(clusters.len());
    for c in clusters {
        if out.last() != Some(c) {
            out.push(c.clone());
        }
    }
    out
}

/// Sliding window of `(c_i, c_{i+1}, c_{i+2})` over the collapsed sequence.
pub fn dedup_and_extract_triples(seq: &WatchSequence) -> Vec<TransitionTriple> {
    let collapsed = collapse_repeats(&seq.clusters);
    collapsed
        .windows(3)
        .map(|w| {
            TransitionTriple::from_ids(w[0].clone(), w[1].clone(), w[2].clone())
                .expect("collapsed sequences are adjacent-distinct")
        })
        .collect()
}

/// Full ingest of one batch, with per-user work split across `workers`
/// threads. The output order depends only on the input, never on `workers`.
pub fn extract_batch_triples(
    batch: &EventBatch,
    vocab: &ClusterVocabulary,
    workers: usize,
) -> Result<Vec<TransitionTriple>, IngestError> {
    let sequences = build_sequences(batch, vocab)?;
    Ok(extract_triples_parallel(&sequences, workers))
}

pub fn extract_triples_parallel(sequences: &[WatchSequence], workers: usize) -> Vec<TransitionTriple> {
    let workers = workers.max(1);
    if workers == 1 || sequences.len() < 2 {
        return sequences.iter().flat_map(dedup_and_extract_triples).collect();
    }
    let chunk = sequences.len().div_ceil(workers);
    thread::scope(|scope| {
        let handles: Vec<_> = sequences
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .flat_map(dedup_and_extract_triples)
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("ingest worker panicked"))
            .collect()
    })
}
