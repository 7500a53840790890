//! Offline evaluation: hit-rate trajectories of table variants, overlap
//! between generation traces, and decay of top-k successor identity.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{PairKey, WatchSequence};
use crate::generation::GenerationRecord;
use crate::ingest::collapse_repeats;
use crate::pipeline::TableVersion;
use crate::serve::{lookup_in, Fallback};
use crate::stats::{top_successors, FrequencyWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", content = "horizon", rename_all = "snake_case")]
pub enum EvalMode {
    /// The prediction must be the very next cluster.
    #[default]
    StrictNext,
    /// The prediction must appear among the next `n` clusters.
    WindowN(usize),
}

impl EvalMode {
    fn horizon(self) -> usize {
        match self {
            EvalMode::StrictNext => 1,
            EvalMode::WindowN(n) => n.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no judgeable positions")]
    Empty,
    #[error("traces are not aligned at position {position}: {a} vs {b}")]
    Alignment { position: usize, a: PairKey, b: PairKey },
    #[error("traces differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
}

/// Running hit counter; merges by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitTally {
    pub hits: u64,
    pub samples: u64,
}

impl HitTally {
    pub fn merge(self, other: HitTally) -> HitTally {
        HitTally {
            hits: self.hits + other.hits,
            samples: self.samples + other.samples,
        }
    }

    pub fn rate(&self) -> Result<f64, EvalError> {
        if self.samples == 0 {
            Err(EvalError::Empty)
        } else {
            Ok(self.hits as f64 / self.samples as f64)
        }
    }
}

pub fn tally_hits(table: &TableVersion, sequences: &[WatchSequence], mode: EvalMode, fallback: &Fallback) -> HitTally {
    let horizon = mode.horizon();
    let mut tally = HitTally::default();
    for seq in sequences {
        let clusters = collapse_repeats(&seq.clusters);
        for i in 0..clusters.len().saturating_sub(2) {
            let pair = PairKey::new(clusters[i].clone(), clusters[i + 1].clone())
                .expect("collapsed sequences are adjacent-distinct");
            tally.samples += 1;
            if let Some(pred) = lookup_in(table, &pair, fallback).prediction {
                let end = (i + 2 + horizon).min(clusters.len());
                if clusters[i + 2..end].contains(&pred) {
                    tally.hits += 1;
                }
            }
        }
    }
    tally
}

/// Mean judgment over every pair position that has at least one successor.
/// Lookup misses count as failures.
pub fn hit_rate(
    table: &TableVersion,
    sequences: &[WatchSequence],
    mode: EvalMode,
    fallback: &Fallback,
) -> Result<(f64, u64), EvalError> {
    let tally = tally_hits(table, sequences, mode, fallback);
    Ok((tally.rate()?, tally.samples))
}

/// Share of aligned positions where both traces resolved to the same cluster.
pub fn output_overlap(a: &[GenerationRecord], b: &[GenerationRecord]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut same = 0usize;
    for (position, (x, y)) in a.iter().zip(b).enumerate() {
        if x.pair != y.pair {
            return Err(EvalError::Alignment {
                position,
                a: x.pair.clone(),
                b: y.pair.clone(),
            });
        }
        if x.resolved.is_some() && x.resolved == y.resolved {
            same += 1;
        }
    }
    Ok(same as f64 / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityPoint {
    pub window_id: u32,
    pub k_top: usize,
    pub shared_pairs: usize,
    pub rate: Option<f64>,
}

/// For each later window, the mean over shared pairs of
/// `|top_k(base) ∩ top_k(later)| / max(|top_k(base)|, |top_k(later)|)`.
/// The denominator equals `k_top` whenever both sides have `k_top` successors.
pub fn topk_identity_rate(base: &FrequencyWindow, later: &[FrequencyWindow], k_top: usize) -> Vec<IdentityPoint> {
    later
        .iter()
        .map(|w| {
            let scores: Vec<f64> = base
                .pairs()
                .filter(|p| w.successors(p).is_some())
                .map(|p| {
                    let a: BTreeSet<_> = top_successors(base, p, k_top).as_set();
                    let b: BTreeSet<_> = top_successors(w, p, k_top).as_set();
                    a.intersection(&b).count() as f64 / a.len().max(b.len()) as f64
                })
                .collect();
            IdentityPoint {
                window_id: w.window_id,
                k_top,
                shared_pairs: scores.len(),
                rate: crate::stats::mean(&scores),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub day: u32,
    pub variant: String,
    pub version_id: u64,
    pub hit_rate: f64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub series: Vec<EvalPoint>,
}

impl EvalReport {
    pub fn variant_points<'a>(&'a self, variant: &'a str) -> impl Iterator<Item = &'a EvalPoint> + 'a {
        self.series.iter().filter(move |p| p.variant == variant)
    }

    pub fn mean_hit_rate(&self, variant: &str) -> Option<f64> {
        let rates: Vec<f64> = self.variant_points(variant).map(|p| p.hit_rate).collect();
        crate::stats::mean(&rates)
    }

    /// `day,variant,hit_rate` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day,variant,hit_rate\n");
        for p in &self.series {
            let _ = writeln!(out, "{},{},{}", p.day, p.variant, p.hit_rate);
        }
        out
    }
}

/// The version serving on `day`: the newest one created strictly before it.
pub fn live_version(versions: &[TableVersion], day: u32) -> Option<&TableVersion> {
    versions
        .iter()
        .filter(|t| t.created_day < day)
        .max_by_key(|t| (t.created_day, t.version_id))
}

/// Evaluates each labelled variant on each day's sequences against the
/// version live that day. Days with no live version or no judgeable
/// positions are left out of the series.
pub fn hit_rate_trajectory(
    variants: &[(String, Vec<TableVersion>)],
    days: &[(u32, Vec<WatchSequence>)],
    mode: EvalMode,
    fallback: &Fallback,
) -> EvalReport {
    let mut series = Vec::new();
    for (label, versions) in variants {
        for (day, sequences) in days {
            let Some(table) = live_version(versions, *day) else {
                continue;
            };
            if let Ok((rate, n)) = hit_rate(table, sequences, mode, fallback) {
                series.push(EvalPoint {
                    day: *day,
                    variant: label.clone(),
                    version_id: table.version_id,
                    hit_rate: rate,
                    sample_count: n,
                });
            }
        }
    }
    EvalReport { mode, series }
}
