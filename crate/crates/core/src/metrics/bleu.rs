use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MetricError, TokenSequence};

/// Maximum n-gram order and per-order weights for [`bleu`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    max_order: usize,
    weights: Vec<f64>,
}

impl BleuConfig {
    /// Uniform weights `1/max_order`.
    pub fn uniform(max_order: usize) -> Result<Self, MetricError> {
        if max_order == 0 {
            return Err(MetricError::InvalidConfig("max_order must be at least 1".into()));
        }
        Self::new(vec![1.0 / max_order as f64; max_order])
    }

    /// Builds a config from explicit weights; `max_order` is `weights.len()`.
    pub fn new(weights: Vec<f64>) -> Result<Self, MetricError> {
        if weights.is_empty() {
            return Err(MetricError::InvalidConfig("at least one weight is required".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MetricError::InvalidConfig("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MetricError::InvalidConfig(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { max_order: weights.len(), weights })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights over the first `orders` n-gram orders, rescaled to sum to 1.
    /// Falls back to uniform when those weights are all zero.
    fn effective_weights(&self, orders: usize) -> Vec<f64> {
        let head = &self.weights[..orders];
        let sum: f64 = head.iter().sum();
        if sum > 0.0 {
            head.iter().map(|w| w / sum).collect()
        } else {
            vec![1.0 / orders as f64; orders]
        }
    }
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self { max_order: 4, weights: vec![0.25; 4] }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram precision: each predicted n-gram is credited at most as
/// many times as it occurs in the reference. Zero when the prediction has no
/// n-grams of order `n`.
pub fn ngram_precision(prediction: &TokenSequence, reference: &TokenSequence, n: usize) -> f64 {
    let pred = ngram_counts(prediction.tokens(), n);
    let total: usize = pred.values().sum();
    if total == 0 {
        return 0.0;
    }
    let refs = ngram_counts(reference.tokens(), n);
    let clipped: usize = pred
        .iter()
        .map(|(gram, &count)| count.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    clipped as f64 / total as f64
}

/// Sentence BLEU with the linear brevity term:
///
/// `min(1, len(pred)/len(ref)) * exp(sum_n w_n * log p_n)`
///
/// Orders above `len(prediction)` are dropped and the remaining weights
/// rescaled. Any zero precision among the kept orders makes the score 0.
pub fn bleu(prediction: &TokenSequence, reference: &TokenSequence, config: &BleuConfig) -> Result<f64, MetricError> {
    Ok(bleu_with_precisions(prediction, reference, config)?.0)
}

/// BLEU plus the precisions `p_1..p_max_order` it was computed from.
pub(crate) fn bleu_with_precisions(
    prediction: &TokenSequence,
    reference: &TokenSequence,
    config: &BleuConfig,
) -> Result<(f64, Vec<f64>), MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let precisions: Vec<f64> = (1..=config.max_order)
        .map(|n| ngram_precision(prediction, reference, n))
        .collect();
    if prediction.is_empty() {
        return Ok((0.0, precisions));
    }
    let orders = config.max_order.min(prediction.len());
    let kept = &precisions[..orders];
    if kept.contains(&0.0) {
        return Ok((0.0, precisions));
    }
    let log_sum: f64 = config
        .effective_weights(orders)
        .iter()
        .zip(kept)
        .map(|(w, p)| w * p.ln())
        .sum();
    let brevity = (prediction.len() as f64 / reference.len() as f64).min(1.0);
    let score = (brevity * log_sum.exp()).clamp(0.0, 1.0);
    Ok((score, precisions))
}
