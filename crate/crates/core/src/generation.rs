//! Prompt rendering, generator backends, and resolution of raw generator
//! output back to vocabulary clusters.
//!
//! The fine-tune prompt describes the user's two most recent clusters by
//! their keywords and asks for exactly one cluster description. The RAG
//! prompt is the same text with a trailing section listing recently popular
//! successors. The training label of a fine-tune example is carried next to
//! the prompt, never inside it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{normalize_label, ClusterId, ClusterVocabulary, PairKey, TransitionTriple};
use crate::retrieval::RetrievalResult;
use crate::seed;
use crate::stats::{ranked_successors, FrequencyWindow};

/// Stored with every published table so outputs can be traced to the prompt
/// wording that produced them.
pub const TEMPLATE_VERSION: &str = "next-interest/v1";

const TASK_INSTRUCTION: &str = "Task: predict the next novel interest cluster for a user of a short-form video platform.\n\
A user recently engaged with the following interest clusters, in order.\n";
const OUTPUT_INSTRUCTION: &str =
    "Answer with exactly one cluster description from the catalogue and nothing else.\n";
const CONTEXT_HEADER: &str = "Recently popular successor clusters:\n";
const GLOBAL_CONTEXT_HEADER: &str = "Recently popular transitions across all users:\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    Finetune,
    Rag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptInstance {
    pub pair: PairKey,
    pub text: String,
    pub injected_context: Option<Vec<ClusterId>>,
    pub label: Option<ClusterId>,
    pub variant: PromptVariant,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("cluster {0} is not in the vocabulary")]
    Vocabulary(ClusterId),
    #[error("retrieval context is for {context} but the prompt is for {pair}")]
    ContextMismatch { pair: PairKey, context: PairKey },
    #[error("backend parameter {name}={value} must lie in [0, 1]")]
    InvalidParameter { name: &'static str, value: f64 },
}

fn keywords_of(id: &ClusterId, vocab: &ClusterVocabulary) -> Result<String, GenerationError> {
    vocab
        .get(id)
        .map(|c| c.keywords.join(", "))
        .ok_or_else(|| GenerationError::Vocabulary(id.clone()))
}

fn description_of<'v>(id: &ClusterId, vocab: &'v ClusterVocabulary) -> Result<&'v str, GenerationError> {
    vocab
        .get(id)
        .map(|c| c.description.as_str())
        .ok_or_else(|| GenerationError::Vocabulary(id.clone()))
}

fn render_body(pair: &PairKey, vocab: &ClusterVocabulary) -> Result<String, GenerationError> {
    let first = keywords_of(&pair.first, vocab)?;
    let second = keywords_of(&pair.second, vocab)?;
    Ok(format!(
        "{TASK_INSTRUCTION}Cluster 1: {first}\nCluster 2: {second}\n{OUTPUT_INSTRUCTION}"
    ))
}

pub fn render_finetune_example(
    pair: &PairKey,
    label: &ClusterId,
    vocab: &ClusterVocabulary,
) -> Result<PromptInstance, GenerationError> {
    let text = render_body(pair, vocab)?;
    if !vocab.contains(label) {
        return Err(GenerationError::Vocabulary(label.clone()));
    }
    Ok(PromptInstance {
        pair: pair.clone(),
        text,
        injected_context: None,
        label: Some(label.clone()),
        variant: PromptVariant::Finetune,
    })
}

/// The fine-tune prompt without a label, as issued for no-RAG bulk inference.
pub fn render_inference_prompt(pair: &PairKey, vocab: &ClusterVocabulary) -> Result<PromptInstance, GenerationError> {
    Ok(PromptInstance {
        pair: pair.clone(),
        text: render_body(pair, vocab)?,
        injected_context: None,
        label: None,
        variant: PromptVariant::Finetune,
    })
}

pub fn render_rag_prompt(
    pair: &PairKey,
    context: &RetrievalResult,
    vocab: &ClusterVocabulary,
) -> Result<PromptInstance, GenerationError> {
    if &context.pair != pair {
        return Err(GenerationError::ContextMismatch {
            pair: pair.clone(),
            context: context.pair.clone(),
        });
    }
    let mut text = render_body(pair, vocab)?;
    text.push_str(CONTEXT_HEADER);
    if context.items.is_empty() {
        text.push_str("(none)\n");
    }
    for item in &context.items {
        let desc = description_of(&item.cluster, vocab)?;
        let kws = keywords_of(&item.cluster, vocab)?;
        let _ = writeln!(text, "- {desc} ({kws})");
    }
    Ok(PromptInstance {
        pair: pair.clone(),
        text,
        injected_context: Some(context.clusters()),
        label: None,
        variant: PromptVariant::Rag,
    })
}

/// RAG prompt with one window-wide context shared by every pair.
pub fn render_global_rag_prompt(
    pair: &PairKey,
    top: &[(TransitionTriple, u64)],
    vocab: &ClusterVocabulary,
) -> Result<PromptInstance, GenerationError> {
    let mut text = render_body(pair, vocab)?;
    text.push_str(GLOBAL_CONTEXT_HEADER);
    if top.is_empty() {
        text.push_str("(none)\n");
    }
    for (t, count) in top {
        let _ = writeln!(
            text,
            "- {} -> {} -> {} ({count})",
            description_of(&t.pair.first, vocab)?,
            description_of(&t.pair.second, vocab)?,
            description_of(&t.next, vocab)?,
        );
    }
    Ok(PromptInstance {
        pair: pair.clone(),
        text,
        injected_context: Some(top.iter().map(|(t, _)| t.next.clone()).collect()),
        label: None,
        variant: PromptVariant::Rag,
    })
}

/// Exact match of the normalized output against normalized descriptions.
pub fn resolve_prediction(raw: &str, vocab: &ClusterVocabulary) -> Option<ClusterId> {
    let key = normalize_label(raw).ok()?;
    vocab.resolve_description(&key).cloned()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("backend {backend} failed: {message}")]
pub struct BackendError {
    pub backend: String,
    pub message: String,
}

/// A text generator. Output must be a pure function of the prompt text and
/// `seed`; implementations are shared across worker threads.
pub trait GeneratorBackend: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, prompt: &PromptInstance, seed: u64) -> Result<String, BackendError>;
}

impl<B: GeneratorBackend + ?Sized> GeneratorBackend for Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&self, prompt: &PromptInstance, seed: u64) -> Result<String, BackendError> {
        (**self).generate(prompt, seed)
    }
}

/// Frozen pair-to-cluster knowledge, standing in for a fine-tuned model.
#[derive(Debug, Clone)]
pub struct SnapshotBackend {
    mapping: HashMap<PairKey, ClusterId>,
    default: ClusterId,
    descriptions: HashMap<ClusterId, String>,
}

impl SnapshotBackend {
    pub fn new(
        mapping: HashMap<PairKey, ClusterId>,
        default: ClusterId,
        vocab: &ClusterVocabulary,
    ) -> Result<Self, GenerationError> {
        let mut descriptions = HashMap::new();
        for id in mapping.values().chain(std::iter::once(&default)) {
            if !descriptions.contains_key(id) {
                descriptions.insert(id.clone(), description_of(id, vocab)?.to_string());
            }
        }
        Ok(SnapshotBackend {
            mapping,
            default,
            descriptions,
        })
    }

    /// The "fine-tune" event: memorize the top-1 successor of every pair in
    /// `window`. Unseen pairs answer with the window's most frequent successor
    /// overall, or the smallest vocabulary id for an empty window.
    pub fn fit(window: &FrequencyWindow, vocab: &ClusterVocabulary) -> Result<Self, GenerationError> {
        let mut mapping = HashMap::new();
        let mut overall: HashMap<&ClusterId, u64> = HashMap::new();
        for pair in window.pairs() {
            if let Some((top, _)) = ranked_successors(window, pair).into_iter().next() {
                mapping.insert(pair.clone(), top);
            }
        }
        for (_, next, n) in window.entries() {
            *overall.entry(next).or_default() += n;
        }
        let default = overall
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(c, _)| c.clone())
            .or_else(|| vocab.sorted_ids().into_iter().next())
            .ok_or_else(|| GenerationError::Vocabulary(ClusterId::new("<empty vocabulary>").unwrap()))?;
        Self::new(mapping, default, vocab)
    }

    pub fn mapping(&self) -> &HashMap<PairKey, ClusterId> {
        &self.mapping
    }

    pub fn default_cluster(&self) -> &ClusterId {
        &self.default
    }

    pub fn predict(&self, pair: &PairKey) -> &ClusterId {
        self.mapping.get(pair).unwrap_or(&self.default)
    }
}

impl GeneratorBackend for SnapshotBackend {
    fn name(&self) -> &str {
        "snapshot"
    }

    fn generate(&self, prompt: &PromptInstance, _seed: u64) -> Result<String, BackendError> {
        Ok(self.descriptions[self.predict(&prompt.pair)].clone())
    }
}

const FOLLOW_SALT: u64 = 0xf011_0000;
const CORRUPT_SALT: u64 = 0xc022_0000;

fn coin(salt: u64, prompt: &PromptInstance, seed: u64) -> f64 {
    seed::unit_interval(&[salt, seed::fnv1a(prompt.text.as_bytes()), seed])
}

/// Echoes the first injected context cluster with probability `p`, otherwise
/// defers to the wrapped backend.
pub struct ContextFollowingBackend {
    p: f64,
    inner: Arc<dyn GeneratorBackend>,
    descriptions: HashMap<ClusterId, String>,
}

impl ContextFollowingBackend {
    pub fn new(p: f64, inner: Arc<dyn GeneratorBackend>, vocab: &ClusterVocabulary) -> Result<Self, GenerationError> {
        check_probability("p", p)?;
        let descriptions = vocab
            .clusters()
            .iter()
            .map(|c| (c.id.clone(), c.description.clone()))
            .collect();
        Ok(ContextFollowingBackend {
            p,
            inner,
            descriptions,
        })
    }
}

impl GeneratorBackend for ContextFollowingBackend {
    fn name(&self) -> &str {
        "context_following"
    }

    fn generate(&self, prompt: &PromptInstance, seed: u64) -> Result<String, BackendError> {
        let first = prompt.injected_context.as_ref().and_then(|c| c.first());
        if let Some(first) = first {
            if coin(FOLLOW_SALT, prompt, seed) < self.p {
                return self.descriptions.get(first).cloned().ok_or_else(|| BackendError {
                    backend: self.name().into(),
                    message: format!("context cluster {first} has no description"),
                });
            }
        }
        self.inner.generate(prompt, seed)
    }
}

/// Garbles the wrapped backend's output with probability `q`.
pub struct CorruptingBackend {
    q: f64,
    inner: Arc<dyn GeneratorBackend>,
}

impl CorruptingBackend {
    pub fn new(q: f64, inner: Arc<dyn GeneratorBackend>) -> Result<Self, GenerationError> {
        check_probability("q", q)?;
        Ok(CorruptingBackend { q, inner })
    }
}

impl GeneratorBackend for CorruptingBackend {
    fn name(&self) -> &str {
        "corrupting"
    }

    fn generate(&self, prompt: &PromptInstance, seed: u64) -> Result<String, BackendError> {
        let out = self.inner.generate(prompt, seed)?;
        if coin(CORRUPT_SALT, prompt, seed) < self.q {
            let reversed: String = out.chars().rev().collect();
            Ok(format!("{reversed} #{:04x}", seed::fnv1a(out.as_bytes()) & 0xffff))
        } else {
            Ok(out)
        }
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), GenerationError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(GenerationError::InvalidParameter { name, value })
    }
}

/// Backend selection as written in pipeline config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum BackendSpec {
    Snapshot,
    ContextFollowing {
        p: f64,
    },
    Corrupting {
        q: f64,
        #[serde(default = "default_corrupted_inner")]
        inner: Box<BackendSpec>,
    },
}

fn default_corrupted_inner() -> Box<BackendSpec> {
    Box::new(BackendSpec::Snapshot)
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::ContextFollowing { p: 1.0 }
    }
}

impl BackendSpec {
    /// Instantiates the backend on top of the current fine-tune snapshot.
    pub fn build(
        &self,
        snapshot: Arc<SnapshotBackend>,
        vocab: &ClusterVocabulary,
    ) -> Result<Arc<dyn GeneratorBackend>, GenerationError> {
        Ok(match self {
            BackendSpec::Snapshot => snapshot,
            BackendSpec::ContextFollowing { p } => {
                Arc::new(ContextFollowingBackend::new(*p, snapshot, vocab)?)
            }
            BackendSpec::Corrupting { q, inner } => {
                Arc::new(CorruptingBackend::new(*q, inner.build(snapshot, vocab)?)?)
            }
        })
    }
}

/// One line of a generation trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub pair: PairKey,
    pub raw: String,
    pub resolved: Option<ClusterId>,
    pub variant: PromptVariant,
}

impl GenerationRecord {
    pub fn new(prompt: &PromptInstance, raw: String, vocab: &ClusterVocabulary) -> Self {
        GenerationRecord {
            pair: prompt.pair.clone(),
            resolved: resolve_prediction(&raw, vocab),
            raw,
            variant: prompt.variant,
        }
    }
}
