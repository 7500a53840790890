//! Successor counting per time window and the drift measures built on it.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::cluster::{ClusterId, PairKey, TransitionTriple};

pub type SuccessorCounts = BTreeMap<ClusterId, u64>;

/// Successor counts keyed by pair for one time window. Stored counts are
/// always positive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyWindow {
    pub window_id: u32,
    counts: BTreeMap<PairKey, SuccessorCounts>,
}

impl FrequencyWindow {
    pub fn new(window_id: u32) -> Self {
        FrequencyWindow {
            window_id,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, triple: &TransitionTriple) {
        self.add_count(&triple.pair, &triple.next, 1);
    }

    pub fn add_count(&mut self, pair: &PairKey, next: &ClusterId, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .counts
            .entry(pair.clone())
            .or_default()
            .entry(next.clone())
            .or_insert(0) += count;
    }

    /// Adds every count of `other` into `self`. The window id is kept.
    pub fn merge(&mut self, other: &FrequencyWindow) {
        for (pair, succ) in &other.counts {
            for (next, &n) in succ {
                self.add_count(pair, next, n);
            }
        }
    }

    pub fn merged<'a>(window_id: u32, windows: impl IntoIterator<Item = &'a FrequencyWindow>) -> Self {
        let mut out = FrequencyWindow::new(window_id);
        for w in windows {
            out.merge(w);
        }
        out
    }

    pub fn successors(&self, pair: &PairKey) -> Option<&SuccessorCounts> {
        self.counts.get(pair)
    }

    pub fn count(&self, pair: &PairKey, next: &ClusterId) -> u64 {
        self.counts
            .get(pair)
            .and_then(|s| s.get(next))
            .copied()
            .unwrap_or(0)
    }

    pub fn pair_total(&self, pair: &PairKey) -> u64 {
        self.counts.get(pair).map_or(0, |s| s.values().sum())
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|s| s.values()).sum()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PairKey> {
        self.counts.keys()
    }

    pub fn pair_count(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(pair, next, count)` in ascending key order.
    pub fn entries(&self) -> impl Iterator<Item = (&PairKey, &ClusterId, u64)> {
        self.counts
            .iter()
            .flat_map(|(p, s)| s.iter().map(move |(c, &n)| (p, c, n)))
    }

    /// Drops pairs observed fewer than `min_support` times.
    pub fn retain_min_support(&mut self, min_support: u64) {
        self.counts
            .retain(|_, succ| succ.values().sum::<u64>() >= min_support);
    }
}

pub fn count_transitions(triples: &[TransitionTriple], window_id: u32) -> FrequencyWindow {
    let mut w = FrequencyWindow::new(window_id);
    for t in triples {
        w.add(t);
    }
    w
}

/// Successors of `pair` ordered by count descending, then id ascending.
pub fn ranked_successors(w: &FrequencyWindow, pair: &PairKey) -> Vec<(ClusterId, u64)> {
    let mut ranked: Vec<(ClusterId, u64)> = w
        .successors(pair)
        .map(|s| s.iter().map(|(c, &n)| (c.clone(), n)).collect())
        .unwrap_or_default();
    // BTreeMap iteration is already id-ascending, so a stable sort on count
    // alone gives the (count desc, id asc) order.
    ranked.sort_by_key(|e| std::cmp::Reverse(e.1));
    ranked
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopKSet {
    pub pair: PairKey,
    pub members: Vec<ClusterId>,
}

impl TopKSet {
    pub fn as_set(&self) -> BTreeSet<ClusterId> {
        self.members.iter().cloned().collect()
    }
}

pub fn top_successors(w: &FrequencyWindow, pair: &PairKey, k_top: usize) -> TopKSet {
    let members = ranked_successors(w, pair)
        .into_iter()
        .take(k_top)
        .map(|(c, _)| c)
        .collect();
    TopKSet {
        pair: pair.clone(),
        members,
    }
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets scoring 1.0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("drift needs at least 2 windows, got {0}")]
    InsufficientWindows(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodScore {
    pub from_window: u32,
    pub to_window: u32,
    pub shared_pairs: usize,
    /// Absent when the two windows share no pair.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub k_top: usize,
    pub per_transition_scores: Vec<PeriodScore>,
    /// Mean and population variance over the present period scores; absent
    /// when no period had a score.
    pub mean: Option<f64>,
    pub variance: Option<f64>,
}

/// Mean top-k Jaccard between adjacent windows, unweighted over shared pairs.
pub fn drift_report(windows: &[FrequencyWindow], k_top: usize) -> Result<DriftReport, StatsError> {
    if windows.len() < 2 {
        return Err(StatsError::InsufficientWindows(windows.len()));
    }
    let per_transition_scores: Vec<PeriodScore> = windows
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let scores: Vec<f64> = prev
                .pairs()
                .filter(|p| cur.successors(p).is_some())
                .map(|p| {
                    jaccard(
                        &top_successors(prev, p, k_top).as_set(),
                        &top_successors(cur, p, k_top).as_set(),
                    )
                })
                .collect();
            PeriodScore {
                from_window: prev.window_id,
                to_window: cur.window_id,
                shared_pairs: scores.len(),
                score: mean(&scores),
            }
        })
        .collect();

    let present: Vec<f64> = per_transition_scores.iter().filter_map(|s| s.score).collect();
    let mean_score = mean(&present);
    let variance = mean_score.map(|m| present.iter().map(|x| (x - m).powi(2)).sum::<f64>() / present.len() as f64);
    Ok(DriftReport {
        k_top,
        per_transition_scores,
        mean: mean_score,
        variance,
    })
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// `cur - prev` for every successor of `pair` seen in either window.
pub fn frequency_delta(
    prev: &FrequencyWindow,
    cur: &FrequencyWindow,
    pair: &PairKey,
) -> BTreeMap<ClusterId, i64> {
    let mut delta = BTreeMap::new();
    for (c, &n) in prev.successors(pair).into_iter().flatten() {
        *delta.entry(c.clone()).or_insert(0) -= n as i64;
    }
    for (c, &n) in cur.successors(pair).into_iter().flatten() {
        *delta.entry(c.clone()).or_insert(0) += n as i64;
    }
    delta
}
