use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MetricError, TokenSequence};

/// Parameters for [`meteor`].
///
/// The fragmentation penalty is `penalty_gamma * (chunks / matches)^penalty_beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorConfig {
    alpha: f64,
    penalty_gamma: f64,
    penalty_beta: f64,
}

impl MeteorConfig {
    pub fn new(alpha: f64, penalty_gamma: f64, penalty_beta: f64) -> Result<Self, MetricError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MetricError::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(penalty_gamma >= 0.0 && penalty_gamma.is_finite()) {
            return Err(MetricError::InvalidConfig(format!("penalty_gamma must be >= 0, got {penalty_gamma}")));
        }
        if !(penalty_beta >= 0.0 && penalty_beta.is_finite()) {
            return Err(MetricError::InvalidConfig(format!("penalty_beta must be >= 0, got {penalty_beta}")));
        }
        Ok(Self { alpha, penalty_gamma, penalty_beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn penalty_gamma(&self) -> f64 {
        self.penalty_gamma
    }

    pub fn penalty_beta(&self) -> f64 {
        self.penalty_beta
    }
}

impl Default for MeteorConfig {
    fn default() -> Self {
        Self { alpha: 0.9, penalty_gamma: 0.5, penalty_beta: 3.0 }
    }
}

/// Result of exact-match unigram alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub match_count: usize,
    pub chunk_count: usize,
    /// matches / len(prediction)
    pub precision: f64,
    /// matches / len(reference)
    pub recall: f64,
}

/// Aligns prediction tokens to reference tokens by exact surface match.
///
/// Walks the prediction left to right and pairs each token with the
/// earliest still-unmatched identical reference token. A chunk is a maximal
/// run of matches that is contiguous and in the same order on both sides.
pub fn align_unigrams(prediction: &TokenSequence, reference: &TokenSequence) -> Alignment {
    let mut free: HashMap<&str, std::collections::VecDeque<usize>> = HashMap::new();
    for (j, tok) in reference.iter().enumerate() {
        free.entry(tok).or_default().push_back(j);
    }

    let mut match_count = 0;
    let mut chunk_count = 0;
    let mut previous: Option<(usize, usize)> = None;
    for (i, tok) in prediction.iter().enumerate() {
        let Some(j) = free.get_mut(tok).and_then(|slots| slots.pop_front()) else {
            continue;
        };
        match_count += 1;
        let extends_chunk = previous.is_some_and(|(pi, pj)| pi + 1 == i && pj + 1 == j);
        if !extends_chunk {
            chunk_count += 1;
        }
        previous = Some((i, j));
    }

    let ratio = |len: usize| if len == 0 { 0.0 } else { match_count as f64 / len as f64 };
    Alignment {
        match_count,
        chunk_count,
        precision: ratio(prediction.len()),
        recall: ratio(reference.len()),
    }
}

/// Sentence METEOR:
///
/// `(1 - P) * (P_r * P_p) / (alpha * P_r + (1 - alpha) * P_p)`
///
/// `alpha` weights recall in the denominator exactly as written above. The
/// common METEOR parameterization puts `alpha` on precision instead, so the
/// two differ whenever `P_r != P_p`.
pub fn meteor(prediction: &TokenSequence, reference: &TokenSequence, config: &MeteorConfig) -> f64 {
    meteor_from_alignment(&align_unigrams(prediction, reference), config)
}

pub(crate) fn meteor_from_alignment(a: &Alignment, config: &MeteorConfig) -> f64 {
    if a.match_count == 0 {
        return 0.0;
    }
    let (p_r, p_p) = (a.recall, a.precision);
    let f_mean = p_r * p_p / (config.alpha * p_r + (1.0 - config.alpha) * p_p);
    let fragmentation = a.chunk_count as f64 / a.match_count as f64;
    let penalty = config.penalty_gamma * fragmentation.powf(config.penalty_beta);
    ((1.0 - penalty) * f_mean).clamp(0.0, 1.0)
}
