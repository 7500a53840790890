use thiserror::Error;

use crate::cluster::{InvalidVocabulary, KeyError, NormalizationError};
use crate::eval::EvalError;
use crate::generation::GenerationError;
use crate::ingest::IngestError;
use crate::io::IoError;
use crate::pipeline::{BuildError, ConfigError, PipelineError};
use crate::retrieval::RetrievalError;
use crate::serve::PublishError;
use crate::stats::StatsError;
use crate::synth::SynthError;

/// Any error the library can return.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Normalization(#[from] NormalizationError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Vocabulary(#[from] InvalidVocabulary),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Publish(#[from] PublishError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Io(#[from] IoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
