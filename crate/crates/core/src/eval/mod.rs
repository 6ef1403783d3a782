//! Backend evaluation over a dataset split.
//!
//! For every keyword in the split each backend produces one
//! [`GenerationBatch`](crate::generation::GenerationBatch). Each generated
//! sentence is scored against all of the keyword's reference contexts
//! (max over references, per metric), the five prompt scores are reduced to
//! one, and the per-keyword scores are averaged.

mod report;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_pairs, DatasetError, KeywordContextPair};
use crate::generation::{generate_batch, GenerationBackend, GenerationBatch, GenerationError, HttpBackend, StubBackend};
use crate::metrics::{score_pair, BleuConfig, MeteorConfig};

pub use report::{format_params, render_report, write_run, RenderedReport, ReportFile};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("split has no pairs")]
    EmptySplit,
    #[error("no backends to evaluate")]
    NoBackends,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("report is inconsistent: {0}")]
    InconsistentReport(String),
}

/// How the five per-prompt scores for a keyword become one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// Highest BLEU wins and its METEOR goes with it; ties go to the lower prompt index.
    #[default]
    BestOfPrompts,
    /// Mean BLEU and mean METEOR over the five prompts.
    MeanOfPrompts,
}

impl FromStr for Reduction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best-of-prompts" => Ok(Self::BestOfPrompts),
            "mean-of-prompts" => Ok(Self::MeanOfPrompts),
            other => Err(format!("unknown reduction {other:?} (expected best-of-prompts or mean-of-prompts)")),
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BestOfPrompts => "best-of-prompts",
            Self::MeanOfPrompts => "mean-of-prompts",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferencePolicy {
    #[default]
    MaxOverReferences,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendTarget {
    Stub,
    Http(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendSpec {
    pub id: String,
    pub target: BackendTarget,
}

impl BackendSpec {
    pub fn stub() -> Self {
        Self { id: StubBackend::ID.into(), target: BackendTarget::Stub }
    }

    pub fn http(id: impl Into<String>, base_url: impl Into<String>) -> Self {
        Self { id: id.into(), target: BackendTarget::Http(base_url.into()) }
    }

    pub fn connect(&self) -> Arc<dyn GenerationBackend> {
        match &self.target {
            BackendTarget::Stub => Arc::new(StubBackend),
            BackendTarget::Http(url) => Arc::new(HttpBackend::new(self.id.clone(), url.clone())),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = String;

    /// Parses `id=url`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, url) = s
            .split_once('=')
            .filter(|(id, url)| !id.is_empty() && !url.is_empty())
            .ok_or_else(|| format!("backend {s:?} must look like id=url"))?;
        Ok(Self::http(id, url))
    }
}

#[derive(Debug, Clone)]
pub struct EvalPlan {
    pub split_path: PathBuf,
    pub backends: Vec<BackendSpec>,
    pub bleu_cfg: BleuConfig,
    pub meteor_cfg: MeteorConfig,
    pub reduction: Reduction,
    pub reference_policy: ReferencePolicy,
    /// Keywords evaluated concurrently per backend.
    pub parallelism: usize,
}

impl EvalPlan {
    pub fn new(split_path: impl Into<PathBuf>, backends: Vec<BackendSpec>) -> Self {
        Self {
            split_path: split_path.into(),
            backends,
            bleu_cfg: BleuConfig::default(),
            meteor_cfg: MeteorConfig::default(),
            reduction: Reduction::default(),
            reference_policy: ReferencePolicy::default(),
            parallelism: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordScore {
    pub keyword: String,
    pub best_bleu: f64,
    pub best_meteor: f64,
    /// Winning template under best-of-prompts; `None` under mean-of-prompts.
    pub chosen_prompt_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub backend_id: String,
    pub avg_bleu: f64,
    pub avg_meteor: f64,
    pub n_keywords: usize,
    pub per_keyword: Vec<KeywordScore>,
}

impl MetricReport {
    pub fn from_scores(backend_id: impl Into<String>, per_keyword: Vec<KeywordScore>) -> Self {
        let n = per_keyword.len();
        let mean = |f: fn(&KeywordScore) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_keyword.iter().map(f).sum::<f64>() / n as f64
            }
        };
        Self {
            backend_id: backend_id.into(),
            avg_bleu: mean(|k| k.best_bleu),
            avg_meteor: mean(|k| k.best_meteor),
            n_keywords: n,
            per_keyword,
        }
    }

    /// Checks that the averages and count agree with `per_keyword`.
    pub fn validate(&self) -> Result<(), EvalError> {
        let again = Self::from_scores(self.backend_id.clone(), self.per_keyword.clone());
        if self.n_keywords != again.n_keywords {
            return Err(EvalError::InconsistentReport(format!(
                "{}: n_keywords {} but {} entries",
                self.backend_id, self.n_keywords, again.n_keywords
            )));
        }
        for (name, stored, recomputed) in [
            ("avg_bleu", self.avg_bleu, again.avg_bleu),
            ("avg_meteor", self.avg_meteor, again.avg_meteor),
        ] {
            if (stored - recomputed).abs() > 1e-12 {
                return Err(EvalError::InconsistentReport(format!(
                    "{}: {name} {stored} differs from mean {recomputed}",
                    self.backend_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendFailure {
    pub backend_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub reports: Vec<MetricReport>,
    pub failures: Vec<BackendFailure>,
}

/// Options that shape scoring, independent of where pairs and backends come from.
#[derive(Debug, Clone)]
pub struct ScoringOptions {
    pub bleu_cfg: BleuConfig,
    pub meteor_cfg: MeteorConfig,
    pub reduction: Reduction,
    pub parallelism: usize,
}

impl From<&EvalPlan> for ScoringOptions {
    fn from(plan: &EvalPlan) -> Self {
        Self {
            bleu_cfg: plan.bleu_cfg.clone(),
            meteor_cfg: plan.meteor_cfg,
            reduction: plan.reduction,
            parallelism: plan.parallelism,
        }
    }
}

/// References grouped by keyword, in first-appearance order.
pub fn group_references(pairs: &[KeywordContextPair]) -> Vec<(String, Vec<String>)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for p in pairs {
        let slot = *index.entry(&p.keyword).or_insert_with(|| {
            groups.push((p.keyword.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(p.context.clone());
    }
    groups
}

/// Scores one batch against a keyword's references.
pub fn score_batch(batch: &GenerationBatch, references: &[String], opts: &ScoringOptions) -> KeywordScore {
    let per_prompt: Vec<(f64, f64)> = batch
        .generations
        .iter()
        .map(|g| {
            references
                .iter()
                .filter_map(|r| score_pair(&g.sentence, r, &opts.bleu_cfg, &opts.meteor_cfg).ok())
                .fold((0.0f64, 0.0f64), |(b, m), s| (b.max(s.bleu), m.max(s.meteor)))
        })
        .collect();

    match opts.reduction {
        Reduction::BestOfPrompts => {
            let mut best = 0;
            for (i, (bleu, _)) in per_prompt.iter().enumerate() {
                if *bleu > per_prompt[best].0 {
                    best = i;
                }
            }
            let (best_bleu, best_meteor) = per_prompt.get(best).copied().unwrap_or((0.0, 0.0));
            KeywordScore {
                keyword: batch.keyword.clone(),
                best_bleu,
                best_meteor,
                chosen_prompt_index: per_prompt.get(best).map(|_| batch.generations[best].template_index),
            }
        }
        Reduction::MeanOfPrompts => {
            let n = per_prompt.len().max(1) as f64;
            KeywordScore {
                keyword: batch.keyword.clone(),
                best_bleu: per_prompt.iter().map(|s| s.0).sum::<f64>() / n,
                best_meteor: per_prompt.iter().map(|s| s.1).sum::<f64>() / n,
                chosen_prompt_index: None,
            }
        }
    }
}

/// Evaluates one backend over grouped references.
pub fn evaluate_backend(
    backend: &dyn GenerationBackend,
    groups: &[(String, Vec<String>)],
    opts: &ScoringOptions,
) -> Result<MetricReport, GenerationError> {
    let scores = crate::parallel_map(groups, opts.parallelism, |(keyword, refs)| {
        generate_batch(keyword, backend).map(|batch| score_batch(&batch, refs, opts))
    });
    let per_keyword = scores.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(MetricReport::from_scores(backend.id(), per_keyword))
}

/// Runs every backend over the pairs. A failing backend is recorded in
/// `failures` and does not affect the others.
pub fn evaluate_pairs(
    pairs: &[KeywordContextPair],
    backends: &[Arc<dyn GenerationBackend>],
    opts: &ScoringOptions,
) -> Result<EvalOutcome, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    if backends.is_empty() {
        return Err(EvalError::NoBackends);
    }
    let groups = group_references(pairs);
    let mut outcome = EvalOutcome::default();
    for backend in backends {
        match evaluate_backend(backend.as_ref(), &groups, opts) {
            Ok(report) => outcome.reports.push(report),
            Err(e) => {
                log::warn!("backend {} failed: {e}", backend.id());
                outcome.failures.push(BackendFailure { backend_id: backend.id().to_string(), error: e.to_string() });
            }
        }
    }
    Ok(outcome)
}

/// Loads the plan's split and evaluates every backend in it.
pub fn evaluate(plan: &EvalPlan) -> Result<EvalOutcome, EvalError> {
    let pairs = load_split(&plan.split_path)?;
    let backends: Vec<_> = plan.backends.iter().map(BackendSpec::connect).collect();
    evaluate_pairs(&pairs, &backends, &ScoringOptions::from(plan))
}

fn load_split(path: &Path) -> Result<Vec<KeywordContextPair>, EvalError> {
    let pairs = read_pairs(path)?;
    if pairs.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    Ok(pairs)
}
