//! Interest clusters, the vocabulary they live in, and the small value types
//! (pairs, triples, watch sequences) that every later stage is keyed by.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default history length used to key transitions: a pair of clusters.
pub const DEFAULT_SEQUENCE_LEN: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("label {raw:?} is empty after normalization")]
pub struct NormalizationError {
    pub raw: String,
}

/// Lowercase, trim, and collapse internal whitespace runs to a single space.
pub fn normalize_label(raw: &str) -> Result<String, NormalizationError> {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    if out.is_empty() {
        return Err(NormalizationError {
            raw: raw.to_string(),
        });
    }
    Ok(out)
}

/// Identifier of an interest cluster. Always stored in normalized form, so
/// equality is normalized-text equality.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClusterId(Arc<str>);

impl ClusterId {
    pub fn new(raw: &str) -> Result<Self, NormalizationError> {
        Ok(ClusterId(Arc::from(normalize_label(raw)?)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ClusterId {
    type Error = NormalizationError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ClusterId::new(&value)
    }
}

impl From<ClusterId> for String {
    fn from(id: ClusterId) -> Self {
        id.0.to_string()
    }
}

impl fmt::Debug for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClusterId({})", self.0)
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A cluster as it appears in the vocabulary file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: ClusterId,
    pub description: String,
    pub keywords: Vec<String>,
}

impl Cluster {
    pub fn new(id: ClusterId, description: impl Into<String>, keywords: Vec<String>) -> Self {
        Cluster {
            id,
            description: description.into(),
            keywords,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateId { id: ClusterId },
    DuplicateDescription { description: String, ids: Vec<ClusterId> },
    EmptyDescription { id: ClusterId },
    EmptyKeywords { id: ClusterId },
    EmptyKeyword { id: ClusterId, position: usize },
    InvalidSequenceLen { k: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id } => write!(f, "duplicate cluster id {id}"),
            Violation::DuplicateDescription { description, ids } => {
                write!(f, "description {description:?} shared by {ids:?}")
            }
            Violation::EmptyDescription { id } => write!(f, "cluster {id} has an empty description"),
            Violation::EmptyKeywords { id } => write!(f, "cluster {id} has no keywords"),
            Violation::EmptyKeyword { id, position } => {
                write!(f, "cluster {id} has an empty keyword at position {position}")
            }
            Violation::InvalidSequenceLen { k } => write!(f, "sequence length k={k} must be >= 1"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid vocabulary: {}", .0.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidVocabulary(pub ValidationReport);

/// The predefined cluster set together with the history length `k`.
///
/// Construction never fails; [`ClusterVocabulary::validate`] reports problems
/// as data. Use [`ClusterVocabulary::checked`] when a well-formed vocabulary
/// is required.
#[derive(Debug, Clone)]
pub struct ClusterVocabulary {
    clusters: Vec<Cluster>,
    k: usize,
    by_id: HashMap<ClusterId, usize>,
    by_description: HashMap<String, Vec<usize>>,
}

impl ClusterVocabulary {
    pub fn new(clusters: Vec<Cluster>) -> Self {
        Self::with_sequence_len(clusters, DEFAULT_SEQUENCE_LEN)
    }

    pub fn with_sequence_len(clusters: Vec<Cluster>, k: usize) -> Self {
        let mut by_id = HashMap::with_capacity(clusters.len());
        let mut by_description: HashMap<String, Vec<usize>> = HashMap::new();
        for (idx, cluster) in clusters.iter().enumerate() {
            by_id.entry(cluster.id.clone()).or_insert(idx);
            if let Ok(key) = normalize_label(&cluster.description) {
                by_description.entry(key).or_default().push(idx);
            }
        }
        ClusterVocabulary {
            clusters,
            k,
            by_id,
            by_description,
        }
    }

    pub fn checked(clusters: Vec<Cluster>) -> Result<Self, InvalidVocabulary> {
        let vocab = Self::new(clusters);
        let report = vocab.validate();
        if report.is_ok() {
            Ok(vocab)
        } else {
            Err(InvalidVocabulary(report))
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_vocabulary(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn get(&self, id: &ClusterId) -> Option<&Cluster> {
        self.by_id.get(id).map(|&idx| &self.clusters[idx])
    }

    pub fn contains(&self, id: &ClusterId) -> bool {
        self.by_id.contains_key(id)
    }

    /// Cluster ids in ascending order.
    pub fn sorted_ids(&self) -> Vec<ClusterId> {
        let mut ids: Vec<ClusterId> = self.by_id.keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Exact lookup by normalized description. Ambiguous descriptions resolve
    /// to nothing.
    pub fn resolve_description(&self, normalized: &str) -> Option<&ClusterId> {
        match self.by_description.get(normalized).map(Vec::as_slice) {
            Some([idx]) => Some(&self.clusters[*idx].id),
            _ => None,
        }
    }
}

pub fn validate_vocabulary(vocab: &ClusterVocabulary) -> ValidationReport {
    let mut violations = Vec::new();
    if vocab.k < 1 {
        violations.push(Violation::InvalidSequenceLen { k: vocab.k });
    }

    let mut seen = HashSet::new();
    let mut reported_dup = HashSet::new();
    for cluster in &vocab.clusters {
        if !seen.insert(&cluster.id) && reported_dup.insert(&cluster.id) {
            violations.push(Violation::DuplicateId {
                id: cluster.id.clone(),
            });
        }
        if normalize_label(&cluster.description).is_err() {
            violations.push(Violation::EmptyDescription {
                id: cluster.id.clone(),
            });
        }
        if cluster.keywords.is_empty() {
            violations.push(Violation::EmptyKeywords {
                id: cluster.id.clone(),
            });
        }
        for (position, kw) in cluster.keywords.iter().enumerate() {
            if kw.trim().is_empty() {
                violations.push(Violation::EmptyKeyword {
                    id: cluster.id.clone(),
                    position,
                });
            }
        }
    }

    let mut shared: Vec<(&String, &Vec<usize>)> = vocab
        .by_description
        .iter()
        .filter(|(_, idxs)| idxs.len() > 1)
        .collect();
    shared.sort();
    for (description, idxs) in shared {
        violations.push(Violation::DuplicateDescription {
            description: description.clone(),
            ids: idxs.iter().map(|&i| vocab.clusters[i].id.clone()).collect(),
        });
    }

    ValidationReport { violations }
}

/// One interaction log record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub user_id: String,
    pub timestamp: u64,
    pub cluster_id: ClusterId,
    pub positive: bool,
}

/// Time-ordered clusters a single user engaged with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchSequence {
    pub user_id: String,
    pub clusters: Vec<ClusterId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("pair ({0}, {0}) repeats a cluster")]
    RepeatedPair(ClusterId),
    #[error("successor {0} equals the pair's second cluster")]
    RepeatedSuccessor(ClusterId),
}

/// An ordered pair of adjacent, distinct clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct PairKey {
    pub first: ClusterId,
    pub second: ClusterId,
}

impl PairKey {
    pub fn new(first: ClusterId, second: ClusterId) -> Result<Self, KeyError> {
        if first == second {
            return Err(KeyError::RepeatedPair(first));
        }
        Ok(PairKey { first, second })
    }
}

#[derive(Deserialize)]
struct RawPair {
    first: ClusterId,
    second: ClusterId,
}

impl TryFrom<RawPair> for PairKey {
    type Error = KeyError;

    fn try_from(raw: RawPair) -> Result<Self, Self::Error> {
        PairKey::new(raw.first, raw.second)
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

/// One observed successor event `(first, second) -> next`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawTriple")]
pub struct TransitionTriple {
    pub pair: PairKey,
    pub next: ClusterId,
}

impl TransitionTriple {
    pub fn new(pair: PairKey, next: ClusterId) -> Result<Self, KeyError> {
        if next == pair.second {
            return Err(KeyError::RepeatedSuccessor(next));
        }
        Ok(TransitionTriple { pair, next })
    }

    pub fn from_ids(first: ClusterId, second: ClusterId, next: ClusterId) -> Result<Self, KeyError> {
        Self::new(PairKey::new(first, second)?, next)
    }
}

#[derive(Deserialize)]
struct RawTriple {
    pair: PairKey,
    next: ClusterId,
}

impl TryFrom<RawTriple> for TransitionTriple {
    type Error = KeyError;

    fn try_from(raw: RawTriple) -> Result<Self, Self::Error> {
        TransitionTriple::new(raw.pair, raw.next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(s: &str) -> ClusterId {
        ClusterId::new(s).unwrap()
    }

    fn cluster(i: &str, desc: &str, kws: &[&str]) -> Cluster {
        Cluster::new(id(i), desc, kws.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_label("  Cooking  ").unwrap(), "cooking");
        assert_eq!(normalize_label("DIY   Crafts").unwrap(), "diy crafts");
        assert!(normalize_label("   ").is_err());
        assert!(normalize_label("").is_err());
        assert_eq!(normalize_label("a\t\nB").unwrap(), "a b");
    }

    #[test]
    fn cluster_id_equality_is_normalized() {
        assert_eq!(id(" Cooking"), id("cooking "));
        assert_ne!(id("cooking"), id("cookin g"));
        let parsed: ClusterId = serde_json::from_str("\"  DIY  Crafts \"").unwrap();
        assert_eq!(parsed.as_str(), "diy crafts");
        assert!(serde_json::from_str::<ClusterId>("\"  \"").is_err());
    }

    #[test]
    fn duplicate_normalized_description_is_reported() {
        let vocab = ClusterVocabulary::new(vec![
            cluster("c1", "Cooking", &["food"]),
            cluster("c2", "cooking ", &["recipes"]),
        ]);
        let report = vocab.validate();
        assert_eq!(
            report.violations,
            vec![Violation::DuplicateDescription {
                description: "cooking".into(),
                ids: vec![id("c1"), id("c2")],
            }]
        );
        assert_eq!(vocab.resolve_description("cooking"), None);
    }

    #[test]
    fn empty_keywords_is_reported() {
        let vocab = ClusterVocabulary::new(vec![
            cluster("c1", "Cooking", &["food"]),
            cluster("c2", "Gardening", &[]),
        ]);
        assert_eq!(
            vocab.validate().violations,
            vec![Violation::EmptyKeywords { id: id("c2") }]
        );
    }

    #[test]
    fn well_formed_vocabulary_is_ok() {
        let vocab = ClusterVocabulary::checked(vec![
            cluster("c1", "Cooking", &["food", "recipes"]),
            cluster("c2", "Gardening", &["plants"]),
            cluster("c3", "DIY Crafts", &["glue", "paper"]),
        ])
        .unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.k(), 2);
    }

    #[test]
    fn duplicate_ids_and_bad_k() {
        let vocab = ClusterVocabulary::with_sequence_len(
            vec![
                cluster("c1", "a", &["x"]),
                cluster("C1", "b", &["y"]),
                cluster("c1", "c", &["z"]),
            ],
            0,
        );
        let v = vocab.validate().violations;
        assert!(v.contains(&Violation::InvalidSequenceLen { k: 0 }));
        assert_eq!(
            v.iter()
                .filter(|x| matches!(x, Violation::DuplicateId { .. }))
                .count(),
            1
        );
    }

    #[test]
    fn pair_and_triple_reject_repeats() {
        assert!(PairKey::new(id("a"), id("a")).is_err());
        assert!(TransitionTriple::from_ids(id("a"), id("b"), id("b")).is_err());
        assert!(TransitionTriple::from_ids(id("a"), id("b"), id("a")).is_ok());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC{0,24}") {
            if let Ok(once) = normalize_label(&raw) {
                prop_assert_eq!(normalize_label(&once).unwrap(), once);
            }
        }

        #[test]
        fn valid_vocab_resolves_injectively(descs in proptest::collection::btree_set("[a-z]{1,6}( [a-z]{1,6})?", 1..12)) {
            let clusters: Vec<Cluster> = descs
                .iter()
                .enumerate()
                .map(|(i, d)| Cluster::new(id(&format!("c{i}")), d.clone(), vec!["kw".into()]))
                .collect();
            let vocab = ClusterVocabulary::new(clusters);
            prop_assert!(vocab.validate().is_ok());
            let mut hits = HashSet::new();
            for c in vocab.clusters() {
                let got = vocab.resolve_description(&normalize_label(&c.description).unwrap());
                prop_assert_eq!(got, Some(&c.id));
                prop_assert!(hits.insert(got.cloned()));
            }
        }
    }
}
