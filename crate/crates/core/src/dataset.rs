//! Keyword-disjoint train/val/test datasets built from harvest records.
//!
//! On disk a dataset is a directory holding `train.jsonl`, `val.jsonl`,
//! `test.jsonl` and `manifest.json`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::harvest::{is_valid_context, validate_keyword, HarvestRecord};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no records to build from")]
    NoRecords,
    #[error("nothing left after deduplication and validation")]
    EmptyAfterDedup,
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format { path: PathBuf, line: Option<usize>, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl DatasetError {
    fn format(path: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        Self::Format { path: path.to_path_buf(), line, message: message.into() }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeywordContextPair {
    pub keyword: String,
    pub context: String,
    pub source_url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.name())
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// (train, val, test) fractions: each positive, summing to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SplitFractions([f64; 3]);

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DatasetError> {
        let f = [train, val, test];
        if f.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(DatasetError::InvalidFractions(format!(
                "every fraction must be positive, got {train},{val},{test}"
            )));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidFractions(format!(
                "fractions {train},{val},{test} sum to {sum}, expected 1"
            )));
        }
        Ok(Self(f))
    }

    pub fn get(&self, split: Split) -> f64 {
        self.0[split as usize]
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self([0.8, 0.1, 0.1])
    }
}

impl TryFrom<[f64; 3]> for SplitFractions {
    type Error = DatasetError;

    fn try_from(f: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(f[0], f[1], f[2])
    }
}

impl From<SplitFractions> for [f64; 3] {
    fn from(f: SplitFractions) -> Self {
        f.0
    }
}

impl std::str::FromStr for SplitFractions {
    type Err = DatasetError;

    /// Parses `a,b,c`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(DatasetError::InvalidFractions(format!("expected three comma-separated numbers, got {s:?}")));
        };
        let num = |x: &str| {
            x.parse::<f64>()
                .map_err(|_| DatasetError::InvalidFractions(format!("{x:?} is not a number")))
        };
        Self::new(num(a)?, num(b)?, num(c)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Distinct keywords (N).
    pub n_keywords: usize,
    /// Largest number of contexts any keyword contributed (M).
    pub m_per_keyword: usize,
    pub split_fractions: SplitFractions,
    /// Pairs per split.
    pub counts: SplitCounts,
    pub seed: u64,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    /// N × M, the upper bound on the number of pairs.
    pub fn capacity(&self) -> usize {
        self.n_keywords * self.m_per_keyword
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub train: Vec<KeywordContextPair>,
    pub val: Vec<KeywordContextPair>,
    pub test: Vec<KeywordContextPair>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[KeywordContextPair] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut Vec<KeywordContextPair> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All pairs in train, val, test order.
    pub fn pairs(&self) -> impl Iterator<Item = &KeywordContextPair> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

/// Position of a keyword in the seeded shuffle, as a point in [0, 1).
pub fn keyword_rank(keyword: &str, seed: u64) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(keyword.as_bytes());
    let digest = hasher.finalize();
    let head = u64::from_be_bytes(digest[..8].try_into().expect("sha256 yields 32 bytes"));
    (head >> 11) as f64 / (1u64 << 53) as f64
}

/// Number of keywords per split for `n` keywords, by largest remainder.
/// Each count is within one keyword of `fraction * n`.
pub fn split_keyword_counts(n: usize, fractions: &SplitFractions) -> [usize; 3] {
    let quotas = Split::ALL.map(|s| fractions.get(s) * n as f64);
    let mut counts = quotas.map(|q| q.floor() as usize);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Deduplicates records and splits them by keyword.
///
/// Keywords are case-folded. Every keyword's pairs land in one split,
/// chosen by ordering keywords on [`keyword_rank`] and cutting that order
/// at the [`split_keyword_counts`] boundaries. Pairs keep input order
/// within a split.
pub fn build_dataset(
    records: &[HarvestRecord],
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Dataset, DatasetManifest), DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::NoRecords);
    }
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    let mut invalid = 0usize;
    for r in records {
        let keyword = r.keyword.to_lowercase();
        if validate_keyword(&keyword).is_err() || !is_valid_context(&r.sentence, &keyword) {
            invalid += 1;
            continue;
        }
        if seen.insert((keyword.clone(), r.sentence.clone())) {
            pairs.push(KeywordContextPair {
                keyword,
                context: r.sentence.clone(),
                source_url: r.source_url.clone(),
            });
        }
    }
    if invalid > 0 {
        warnings.push(format!("dropped {invalid} records that fail the context checks"));
    }
    if pairs.is_empty() {
        return Err(DatasetError::EmptyAfterDedup);
    }

    let mut per_keyword: HashMap<&str, usize> = HashMap::new();
    for p in &pairs {
        *per_keyword.entry(&p.keyword).or_default() += 1;
    }
    let mut keywords: Vec<(f64, &str)> = per_keyword.keys().map(|k| (keyword_rank(k, seed), *k)).collect();
    keywords.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));

    let n = keywords.len();
    let counts = split_keyword_counts(n, &fractions);
    for (split, &count) in Split::ALL.iter().zip(&counts) {
        if count == 0 {
            warnings.push(format!(
                "DegenerateSplit: {split} fraction {} of {n} keywords rounds to zero",
                fractions.get(*split)
            ));
        }
    }
    let mut assignment: HashMap<String, Split> = HashMap::new();
    let mut cursor = keywords.iter();
    for (split, &count) in Split::ALL.iter().zip(&counts) {
        for (_, k) in cursor.by_ref().take(count) {
            assignment.insert(k.to_string(), *split);
        }
    }
    let m_per_keyword = per_keyword.values().copied().max().unwrap_or(0);

    let mut dataset = Dataset::default();
    for pair in pairs {
        let split = assignment[&pair.keyword];
        dataset.split_mut(split).push(pair);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let manifest = DatasetManifest {
        n_keywords: n,
        m_per_keyword,
        split_fractions: fractions,
        counts: SplitCounts { train: dataset.train.len(), val: dataset.val.len(), test: dataset.test.len() },
        seed,
        created_at: Utc::now(),
        warnings,
    };
    Ok((dataset, manifest))
}

/// Writes split files and the manifest into `dir`, creating it if needed.
pub fn write_dataset(dir: &Path, dataset: &Dataset, manifest: &DatasetManifest) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(DatasetError::io(dir))?;
    for split in Split::ALL {
        let path = dir.join(split.file_name());
        crate::jsonl::write_file(&path, dataset.split(split)).map_err(DatasetError::io(&path))?;
    }
    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(DatasetError::io(&path))
}

/// Reads one split file, checking every pair.
pub fn read_pairs(path: &Path) -> Result<Vec<KeywordContextPair>, DatasetError> {
    let text = fs::read_to_string(path).map_err(DatasetError::io(path))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let pair: KeywordContextPair = serde_json::from_str(line)
            .map_err(|e| DatasetError::format(path, Some(lineno), e.to_string()))?;
        validate_keyword(&pair.keyword).map_err(|m| DatasetError::format(path, Some(lineno), m))?;
        if !is_valid_context(&pair.context, &pair.keyword) {
            return Err(DatasetError::format(
                path,
                Some(lineno),
                format!("context does not contain {:?} or has a bad length", pair.keyword),
            ));
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Loads a directory written by [`write_dataset`] and re-checks its invariants.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetManifest), DatasetError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(DatasetError::io(&manifest_path))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::format(&manifest_path, None, e.to_string()))?;

    let mut dataset = Dataset::default();
    let mut seen = HashSet::new();
    let mut owner: HashMap<String, Split> = HashMap::new();
    for split in Split::ALL {
        let path = dir.join(split.file_name());
        let pairs = read_pairs(&path)?;
        for p in &pairs {
            if !seen.insert((p.keyword.to_lowercase(), p.context.clone())) {
                return Err(DatasetError::format(&path, None, format!("duplicate pair for {:?}", p.keyword)));
            }
            if let Some(other) = owner.insert(p.keyword.to_lowercase(), split) {
                if other != split {
                    return Err(DatasetError::format(
                        &path,
                        None,
                        format!("keyword {:?} appears in both {other} and {split}", p.keyword),
                    ));
                }
            }
        }
        if pairs.len() != manifest.counts.get(split) {
            return Err(DatasetError::format(
                &manifest_path,
                None,
                format!(
                    "manifest says {split} has {} pairs but {} has {}",
                    manifest.counts.get(split),
                    split.file_name(),
                    pairs.len()
                ),
            ));
        }
        *dataset.split_mut(split) = pairs;
    }
    Ok((dataset, manifest))
}
