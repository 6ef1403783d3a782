//! Tokenization and sentence-level BLEU / METEOR.
//!
//! Every function here is pure. Scores are computed against a single
//! reference; multi-reference handling belongs to [`crate::eval`].

mod bleu;
mod meteor;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{bleu, ngram_precision, BleuConfig};
pub use meteor::{align_unigrams, meteor, Alignment, MeteorConfig};
pub use tokenize::{tokenize, TokenSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("reference is empty after tokenization")]
    EmptyReference,
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
}

/// All per-sentence numbers for one (prediction, reference) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub bleu: f64,
    pub meteor: f64,
    /// `p_1 ..= p_max_order`
    pub ngram_precisions: Vec<f64>,
    pub match_count: usize,
    pub chunk_count: usize,
}

/// Tokenizes both sides once and computes BLEU and METEOR.
pub fn score_pair(
    prediction: &str,
    reference: &str,
    bleu_cfg: &BleuConfig,
    meteor_cfg: &MeteorConfig,
) -> Result<SentenceScore, MetricError> {
    let pred = tokenize(prediction);
    let reference = tokenize(reference);
    let (bleu, ngram_precisions) = bleu::bleu_with_precisions(&pred, &reference, bleu_cfg)?;
    let alignment = align_unigrams(&pred, &reference);
    Ok(SentenceScore {
        bleu,
        meteor: meteor::meteor_from_alignment(&alignment, meteor_cfg),
        ngram_precisions,
        match_count: alignment.match_count,
        chunk_count: alignment.chunk_count,
    })
}
