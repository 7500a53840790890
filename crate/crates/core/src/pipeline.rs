//! Bulk inference over cluster pairs, quality gates, and the hybrid
//! fine-tune / RAG refresh schedule.
//!
//! A fine-tune day rebuilds the snapshot backend from the trailing window
//! and publishes a table generated without retrieval. A RAG day keeps the
//! existing snapshot and publishes a table whose prompts carry the recent
//! window's successor statistics. Builds that fail a gate publish nothing,
//! leaving the previous version live.

use std::collections::HashMap;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterId, ClusterVocabulary, PairKey, TransitionTriple};
use crate::generation::{
    render_global_rag_prompt, render_inference_prompt, render_rag_prompt, BackendError, BackendSpec,
    GenerationError, GenerationRecord, GeneratorBackend, PromptInstance, SnapshotBackend, TEMPLATE_VERSION,
};
use crate::ingest::{build_sequences, extract_triples_parallel, EventBatch, IngestError};
use crate::retrieval::{
    retrieve_global, retrieve_instance, Granularity, RetrievalError, RetrievalQuery, RetrievalSettings,
};
use crate::seed;
use crate::serve::{PublishError, TableStore};
use crate::stats::{count_transitions, FrequencyWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Finetune,
    Rag,
    /// Ground-truth table from a synthetic model.
    Oracle,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityGateReport {
    pub exact_match_rate: f64,
    pub test_recall: f64,
    pub prompts_issued: u64,
    pub unresolved: u64,
}

/// A published pair-to-cluster mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct TableVersion {
    pub version_id: u64,
    pub created_day: u32,
    pub entries: HashMap<PairKey, ClusterId>,
    pub provenance: Provenance,
    pub template_version: String,
    pub gate_report: QualityGateReport,
}

impl TableVersion {
    /// Entries in ascending pair order.
    pub fn sorted_entries(&self) -> Vec<(&PairKey, &ClusterId)> {
        let mut rows: Vec<_> = self.entries.iter().collect();
        rows.sort();
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateThresholds {
    pub exact_match_min: f64,
    pub recall_min: f64,
}

impl Default for GateThresholds {
    fn default() -> Self {
        GateThresholds {
            exact_match_min: 0.90,
            recall_min: 0.015,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub finetune_period_days: u32,
    pub rag_period_days: u32,
    /// Days of data the fine-tune snapshot is fitted on, ending at the
    /// fine-tune day.
    pub finetune_window_days: u32,
    pub retrieval: RetrievalSettings,
    pub gates: GateThresholds,
    pub min_support: u64,
    pub parallelism: usize,
    pub max_retries: u32,
    /// Fraction of users held out of counting and used for test recall.
    pub holdout_fraction: f64,
    pub backend: BackendSpec,
    pub seed: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            finetune_period_days: 30,
            rag_period_days: 3,
            finetune_window_days: 7,
            retrieval: RetrievalSettings::default(),
            gates: GateThresholds::default(),
            min_support: 1,
            parallelism: 4,
            max_retries: 2,
            holdout_fraction: 0.1,
            backend: BackendSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("rag_period_days ({rag}) exceeds finetune_period_days ({finetune})")]
    RagSlowerThanFinetune { rag: u32, finetune: u32 },
    #[error("holdout_fraction must lie in [0, 1)")]
    Holdout,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("finetune_period_days", self.finetune_period_days as u64),
            ("rag_period_days", self.rag_period_days as u64),
            ("finetune_window_days", self.finetune_window_days as u64),
            ("retrieval.window_days", self.retrieval.window_days as u64),
            ("retrieval.n", self.retrieval.n as u64),
            ("parallelism", self.parallelism as u64),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.rag_period_days > self.finetune_period_days {
            return Err(ConfigError::RagSlowerThanFinetune {
                rag: self.rag_period_days,
                finetune: self.finetune_period_days,
            });
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(ConfigError::Holdout);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("no pairs to build a table for")]
    NoPairs,
    #[error("generation for pair {pair} failed after {attempts} attempts: {source}")]
    Backend {
        pair: PairKey,
        attempts: u32,
        source: BackendError,
    },
    #[error("prompt for pair {pair}: {source}")]
    Prompt { pair: PairKey, source: GenerationError },
    #[error("retrieval for pair {pair}: {source}")]
    Retrieval { pair: PairKey, source: RetrievalError },
}

/// Observed pairs with at least `min_support` successor events, ascending.
pub fn enumerate_pairs(w: &FrequencyWindow, min_support: u64) -> Vec<PairKey> {
    // window keys iterate in (first, second) order already
    w.pairs()
        .filter(|p| w.pair_total(p) >= min_support)
        .cloned()
        .collect()
}

/// Everything a single bulk-inference run reads.
#[derive(Debug, Clone, Copy)]
pub struct BuildInputs<'a> {
    pub pairs: &'a [PairKey],
    pub recent: &'a FrequencyWindow,
    pub previous: Option<&'a FrequencyWindow>,
    pub use_rag: bool,
    pub test_triples: &'a [TransitionTriple],
    pub version_id: u64,
    pub created_day: u32,
}

#[derive(Debug, Clone)]
pub struct TableBuild {
    pub table: TableVersion,
    pub report: QualityGateReport,
    pub trace: Vec<GenerationRecord>,
}

/// Fraction of `test` triples whose next cluster is exactly the table entry
/// for their pair. Empty test sets score 0.
pub fn strict_recall(entries: &HashMap<PairKey, ClusterId>, test: &[TransitionTriple]) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let hits = test
        .iter()
        .filter(|t| entries.get(&t.pair) == Some(&t.next))
        .count();
    hits as f64 / test.len() as f64
}

fn render_prompt(
    pair: &PairKey,
    inputs: &BuildInputs<'_>,
    settings: &RetrievalSettings,
    global: Option<&[(TransitionTriple, u64)]>,
    vocab: &ClusterVocabulary,
) -> Result<PromptInstance, BuildError> {
    let prompt = if !inputs.use_rag {
        render_inference_prompt(pair, vocab)
    } else if let Some(top) = global {
        render_global_rag_prompt(pair, top, vocab)
    } else {
        let to_build = |source| BuildError::Retrieval {
            pair: pair.clone(),
            source,
        };
        let query = RetrievalQuery::new(pair.clone(), settings.mode, settings.n).map_err(to_build)?;
        let context = retrieve_instance(inputs.recent, inputs.previous, &query).map_err(to_build)?;
        render_rag_prompt(pair, &context, vocab)
    };
    prompt.map_err(|source| BuildError::Prompt {
        pair: pair.clone(),
        source,
    })
}

fn generate_with_retries(
    backend: &dyn GeneratorBackend,
    prompt: &PromptInstance,
    base_seed: u64,
    max_retries: u32,
) -> Result<String, BuildError> {
    let mut attempt = 0;
    loop {
        match backend.generate(prompt, seed::derive(&[base_seed, attempt as u64])) {
            Ok(raw) => return Ok(raw),
            Err(source) if attempt >= max_retries => {
                return Err(BuildError::Backend {
                    pair: prompt.pair.clone(),
                    attempts: attempt + 1,
                    source,
                })
            }
            Err(_) => attempt += 1,
        }
    }
}

/// Renders, generates and resolves one prompt per pair, with at most
/// `cfg.parallelism` generations in flight.
pub fn build_table(
    backend: &dyn GeneratorBackend,
    inputs: &BuildInputs<'_>,
    cfg: &ScheduleConfig,
    vocab: &ClusterVocabulary,
) -> Result<TableBuild, BuildError> {
    if inputs.pairs.is_empty() {
        return Err(BuildError::NoPairs);
    }
    let global = (inputs.use_rag && cfg.retrieval.granularity == Granularity::Global)
        .then(|| retrieve_global(inputs.recent, cfg.retrieval.n));
    let base_seed = seed::derive(&[cfg.seed, inputs.created_day as u64]);

    let run_one = |pair: &PairKey| -> Result<GenerationRecord, BuildError> {
        let prompt = render_prompt(pair, inputs, &cfg.retrieval, global.as_deref(), vocab)?;
        let raw = generate_with_retries(backend, &prompt, base_seed, cfg.max_retries)?;
        Ok(GenerationRecord::new(&prompt, raw, vocab))
    };

    let workers = cfg.parallelism.max(1);
    let chunk = inputs.pairs.len().div_ceil(workers);
    let results: Vec<Result<GenerationRecord, BuildError>> = if workers == 1 {
        inputs.pairs.iter().map(run_one).collect()
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = inputs
                .pairs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(run_one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("generation worker panicked"))
                .collect()
        })
    };
    let trace = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let entries: HashMap<PairKey, ClusterId> = trace
        .iter()
        .filter_map(|r| r.resolved.clone().map(|c| (r.pair.clone(), c)))
        .collect();
    let prompts_issued = trace.len() as u64;
    let unresolved = prompts_issued - entries.len() as u64;
    let report = QualityGateReport {
        exact_match_rate: 1.0 - unresolved as f64 / prompts_issued as f64,
        test_recall: strict_recall(&entries, inputs.test_triples),
        prompts_issued,
        unresolved,
    };
    let table = TableVersion {
        version_id: inputs.version_id,
        created_day: inputs.created_day,
        entries,
        provenance: if inputs.use_rag {
            Provenance::Rag
        } else {
            Provenance::Finetune
        },
        template_version: TEMPLATE_VERSION.to_string(),
        gate_report: report,
    };
    Ok(TableBuild { table, report, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum GateViolation {
    ExactMatch { rate: f64, min: f64 },
    Recall { recall: f64, min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "violations", rename_all = "snake_case")]
pub enum GateDecision {
    Pass,
    Halt(Vec<GateViolation>),
}

impl GateDecision {
    pub fn passed(&self) -> bool {
        matches!(self, GateDecision::Pass)
    }
}

/// Halts when exact match falls below its minimum or test recall falls below
/// its minimum. Values exactly at a threshold pass.
pub fn apply_quality_gates(r: &QualityGateReport, gates: &GateThresholds) -> GateDecision {
    let mut violations = Vec::new();
    if r.exact_match_rate < gates.exact_match_min {
        violations.push(GateViolation::ExactMatch {
            rate: r.exact_match_rate,
            min: gates.exact_match_min,
        });
    }
    if r.test_recall < gates.recall_min {
        violations.push(GateViolation::Recall {
            recall: r.test_recall,
            min: gates.recall_min,
        });
    }
    if violations.is_empty() {
        GateDecision::Pass
    } else {
        GateDecision::Halt(violations)
    }
}

/// Per-day training counts and held-out test triples.
#[derive(Debug, Clone)]
pub struct PreparedDays {
    pub train: Vec<FrequencyWindow>,
    pub test: Vec<Vec<TransitionTriple>>,
}

const HOLDOUT_SALT: u64 = 0x401d_0007;

impl PreparedDays {
    pub fn new(days: &[EventBatch], cfg: &ScheduleConfig, vocab: &ClusterVocabulary) -> Result<Self, IngestError> {
        let mut train = Vec::with_capacity(days.len());
        let mut test = Vec::with_capacity(days.len());
        for batch in days {
            let (held, kept): (Vec<_>, Vec<_>) = build_sequences(batch, vocab)?.into_iter().partition(|s| {
                cfg.holdout_fraction > 0.0
                    && seed::unit_interval(&[cfg.seed, HOLDOUT_SALT, seed::fnv1a(s.user_id.as_bytes())])
                        < cfg.holdout_fraction
            });
            let workers = cfg.parallelism.max(1);
            train.push(count_transitions(
                &extract_triples_parallel(&kept, workers),
                batch.source_day,
            ));
            test.push(extract_triples_parallel(&held, workers));
        }
        Ok(PreparedDays { train, test })
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    /// Merged counts of the `span` days ending at `end` (inclusive), tagged
    /// with `end` as window id. Days before 0 are skipped.
    pub fn window_ending(&self, end: u32, span: u32) -> FrequencyWindow {
        let start = (end + 1).saturating_sub(span) as usize;
        FrequencyWindow::merged(end, &self.train[start..=end as usize])
    }

    /// Held-out triples when a holdout is configured, else the training
    /// triples themselves, for the same day range.
    pub fn test_ending(&self, end: u32, span: u32) -> Vec<TransitionTriple> {
        let start = (end + 1).saturating_sub(span) as usize;
        let held: Vec<TransitionTriple> = self.test[start..=end as usize].iter().flatten().cloned().collect();
        if !held.is_empty() {
            return held;
        }
        let w = self.window_ending(end, span);
        w.entries()
            .flat_map(|(p, c, n)| {
                std::iter::repeat_n(
                    TransitionTriple {
                        pair: p.clone(),
                        next: c.clone(),
                    },
                    n as usize,
                )
            })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error("day {day}: {source}")]
    Build { day: u32, source: BuildError },
    #[error(transparent)]
    Publish(#[from] PublishError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RefreshOutcome {
    Published { version_id: u64 },
    Halted { violations: Vec<GateViolation> },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshEvent {
    pub day: u32,
    pub provenance: Provenance,
    pub gate_report: Option<QualityGateReport>,
    #[serde(flatten)]
    pub outcome: RefreshOutcome,
}

#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub versions: Vec<TableVersion>,
    pub events: Vec<RefreshEvent>,
}

/// Builds the generator for a given day on top of the current snapshot.
pub type BackendFactory<'a> =
    dyn Fn(u32, Arc<SnapshotBackend>) -> Result<Arc<dyn GeneratorBackend>, GenerationError> + 'a;

/// Runs the refresh schedule with the backend named in `cfg.backend`.
pub fn run_schedule(
    days: &[EventBatch],
    cfg: &ScheduleConfig,
    vocab: &ClusterVocabulary,
) -> Result<ScheduleRun, PipelineError> {
    let spec = cfg.backend.clone();
    let factory = move |_day: u32, snap: Arc<SnapshotBackend>| spec.build(snap, vocab);
    run_schedule_with(days, cfg, vocab, &factory, None)
}

/// Day `d` (data through the end of day `d`):
/// - `d % finetune_period_days == 0`: refit the snapshot, publish a
///   fine-tune table;
/// - otherwise `d % rag_period_days == 0`: publish a RAG table.
///
/// Published versions are also pushed into `store` when given.
pub fn run_schedule_with(
    days: &[EventBatch],
    cfg: &ScheduleConfig,
    vocab: &ClusterVocabulary,
    backend_factory: &BackendFactory<'_>,
    store: Option<&TableStore>,
) -> Result<ScheduleRun, PipelineError> {
    cfg.validate()?;
    let prepared = PreparedDays::new(days, cfg, vocab)?;
    let mut snapshot: Option<Arc<SnapshotBackend>> = None;
    let mut versions = Vec::new();
    let mut events = Vec::new();
    let mut next_version = 1u64;

    for d in 0..prepared.len() as u32 {
        let finetune_day = d % cfg.finetune_period_days == 0;
        let rag_day = !finetune_day && d % cfg.rag_period_days == 0;
        if !finetune_day && !rag_day {
            continue;
        }

        let (provenance, recent, previous, test) = if finetune_day {
            let trailing = prepared.window_ending(d, cfg.finetune_window_days);
            snapshot = Some(Arc::new(SnapshotBackend::fit(&trailing, vocab)?));
            let test = prepared.test_ending(d, cfg.finetune_window_days);
            (Provenance::Finetune, trailing, None, test)
        } else {
            let span = cfg.retrieval.window_days;
            let recent = prepared.window_ending(d, span);
            let previous = if d >= span {
                prepared.window_ending(d - span, span)
            } else {
                FrequencyWindow::new(0)
            };
            (Provenance::Rag, recent, Some(previous), prepared.test_ending(d, span))
        };
        let Some(snap) = snapshot.clone() else {
            events.push(RefreshEvent {
                day: d,
                provenance,
                gate_report: None,
                outcome: RefreshOutcome::Skipped {
                    reason: "no fine-tune snapshot yet".into(),
                },
            });
            continue;
        };

        let pairs = enumerate_pairs(&recent, cfg.min_support);
        if pairs.is_empty() {
            events.push(RefreshEvent {
                day: d,
                provenance,
                gate_report: None,
                outcome: RefreshOutcome::Skipped {
                    reason: "no pairs with enough support".into(),
                },
            });
            continue;
        }

        let backend = backend_factory(d, snap)?;
        let inputs = BuildInputs {
            pairs: &pairs,
            recent: &recent,
            previous: previous.as_ref(),
            use_rag: provenance == Provenance::Rag,
            test_triples: &test,
            version_id: next_version,
            created_day: d,
        };
        let build = build_table(backend.as_ref(), &inputs, cfg, vocab)
            .map_err(|source| PipelineError::Build { day: d, source })?;

        let decision = apply_quality_gates(&build.report, &cfg.gates);
        let outcome = match decision {
            GateDecision::Halt(violations) => RefreshOutcome::Halted { violations },
            GateDecision::Pass if build.table.entries.is_empty() => RefreshOutcome::Skipped {
                reason: "no resolved entries".into(),
            },
            GateDecision::Pass => {
                if let Some(store) = store {
                    store.publish(build.table.clone())?;
                }
                versions.push(build.table);
                next_version += 1;
                RefreshOutcome::Published {
                    version_id: next_version - 1,
                }
            }
        };
        events.push(RefreshEvent {
            day: d,
            provenance,
            gate_report: Some(build.report),
            outcome,
        });
    }

    Ok(ScheduleRun { versions, events })
}
