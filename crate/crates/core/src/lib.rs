//! Next-interest transition tables for recommendation exploration.
//!
//! User watch histories are reduced to cluster transitions `(c1, c2) -> c3`.
//! A generator maps every observed pair to a predicted next cluster, and the
//! resulting table is served from memory. Tables are rebuilt on a hybrid
//! schedule: a slow cadence refits the generator snapshot, and a fast cadence
//! re-runs bulk inference with recently popular successors injected into the
//! prompt.
//!
//! | module | role |
//! |---|---|
//! | [`cluster`] | vocabulary, ids, pairs and triples |
//! | [`ingest`] | events to watch sequences to triples |
//! | [`stats`] | windowed counts, top-k sets, drift |
//! | [`retrieval`] | frequency and trend context |
//! | [`generation`] | prompt templates and mock backends |
//! | [`pipeline`] | table builds, quality gates, the schedule |
//! | [`serve`] | versioned hot-swap store |
//! | [`eval`] | hit rate, overlap, identity decay |
//! | [`synth`] | drifting synthetic users with known truth |
//! | [`io`] | file formats |

pub mod cluster;
pub mod commands;
pub mod error;
pub mod eval;
pub mod generation;
pub mod ingest;
pub mod io;
pub mod pipeline;
pub mod retrieval;
pub mod seed;
pub mod serve;
pub mod stats;
pub mod synth;

pub use cluster::{Cluster, ClusterId, ClusterVocabulary, InteractionEvent, PairKey, TransitionTriple, WatchSequence};
pub use error::{Error, Result};
pub use ingest::EventBatch;
pub use pipeline::{ScheduleConfig, TableVersion};
pub use serve::{LookupResult, TableStore};
pub use stats::FrequencyWindow;
