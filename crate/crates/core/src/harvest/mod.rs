//! Concordance harvesting: fetch example pages per keyword and pull out
//! sentences that use the keyword.

mod extract;
mod rate_limit;
mod wordlist;

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{
    extract_sentences, is_valid_context, ContainerSelector, Page, MAX_SENTENCE_TOKENS, MIN_SENTENCE_TOKENS,
};
pub use rate_limit::RateLimiter;
pub use wordlist::{validate_keyword, Wordlist, WordlistError};

pub const DEFAULT_BASE_URL: &str = "https://context.reverso.net/translation/english-french";

const PATH_SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~');

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarvestError {
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("rate limited by server at {url}")]
    RateLimitedByServer { url: String },
    #[error("no page for {url}")]
    NotFound { url: String },
    #[error("unexpected HTTP status {status} from {url}")]
    UnexpectedStatus { url: String, status: u16 },
    #[error("could not parse {url}: {message}")]
    Parse { url: String, message: String },
    #[error("invalid keyword: {0}")]
    InvalidKeyword(String),
    #[error("invalid harvest config: {0}")]
    InvalidConfig(String),
}

impl HarvestError {
    fn is_transport(&self) -> bool {
        matches!(self, Self::Transport { .. } | Self::RateLimitedByServer { .. })
    }

    fn skip_reason(&self) -> String {
        match self {
            Self::NotFound { .. } => "not_found".into(),
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestConfig {
    /// Maximum contexts kept per keyword (M).
    pub top_m: usize,
    pub base_url: String,
    /// Requests per second across all in-flight fetches.
    pub rate_limit: f64,
    pub timeout: Duration,
    pub max_retries: u32,
    /// First retry delay; doubles on every further attempt.
    pub backoff_base: Duration,
    /// Keywords fetched concurrently.
    pub parallelism: usize,
    pub container: ContainerSelector,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self {
            top_m: 10,
            base_url: DEFAULT_BASE_URL.into(),
            rate_limit: 2.0,
            timeout: Duration::from_secs(10),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            parallelism: 4,
            container: ContainerSelector::default(),
        }
    }
}

impl HarvestConfig {
    pub fn validate(&self) -> Result<(), HarvestError> {
        let bad = |m: &str| Err(HarvestError::InvalidConfig(m.into()));
        if self.top_m == 0 {
            return bad("top_m must be at least 1");
        }
        if !(self.rate_limit > 0.0 && self.rate_limit.is_finite()) {
            return bad("rate_limit must be positive");
        }
        if self.timeout.is_zero() {
            return bad("timeout must be positive");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        Ok(())
    }
}

/// One harvested example sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestRecord {
    pub keyword: String,
    pub sentence: String,
    pub source_url: String,
    pub fetched_at: DateTime<Utc>,
}

/// A keyword that produced no records, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub keyword: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HarvestOutput {
    pub records: Vec<HarvestRecord>,
    pub skipped: Vec<SkipEntry>,
}

/// HTTP fetcher plus extractor sharing one rate-limit budget.
///
/// Clones share the same limiter and connection pool.
#[derive(Debug, Clone)]
pub struct Harvester {
    config: HarvestConfig,
    agent: ureq::Agent,
    limiter: Arc<RateLimiter>,
}

impl Harvester {
    pub fn new(config: HarvestConfig) -> Result<Self, HarvestError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(config.timeout)
            .user_agent(concat!("kic-harvester/", env!("CARGO_PKG_VERSION")))
            .build();
        let limiter = Arc::new(RateLimiter::new(config.rate_limit));
        Ok(Self { config, agent, limiter })
    }

    pub fn config(&self) -> &HarvestConfig {
        &self.config
    }

    pub fn page_url(&self, keyword: &str) -> String {
        format!(
            "{}/{}",
            self.config.base_url.trim_end_matches('/'),
            utf8_percent_encode(keyword, PATH_SEGMENT)
        )
    }

    /// GETs the concordance page for `keyword`.
    ///
    /// 429, 5xx and transport failures are retried with exponential backoff
    /// up to `max_retries` times. 404 is returned immediately as `NotFound`.
    pub fn fetch_page(&self, keyword: &str) -> Result<Page, HarvestError> {
        validate_keyword(keyword).map_err(HarvestError::InvalidKeyword)?;
        let url = self.page_url(keyword);
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            let failure = match self.agent.get(&url).call() {
                Ok(response) => {
                    let body = response.into_string().map_err(|e| HarvestError::Transport {
                        url: url.clone(),
                        message: e.to_string(),
                    })?;
                    return Ok(Page { url, body, fetched_at: Utc::now() });
                }
                Err(ureq::Error::Status(404, _)) => return Err(HarvestError::NotFound { url }),
                Err(ureq::Error::Status(429, _)) => HarvestError::RateLimitedByServer { url: url.clone() },
                Err(ureq::Error::Status(status, _)) if status >= 500 => HarvestError::Transport {
                    url: url.clone(),
                    message: format!("HTTP {status}"),
                },
                Err(ureq::Error::Status(status, _)) => {
                    return Err(HarvestError::UnexpectedStatus { url, status });
                }
                Err(ureq::Error::Transport(t)) => HarvestError::Transport {
                    url: url.clone(),
                    message: t.to_string(),
                },
            };
            if attempt >= self.config.max_retries {
                return Err(failure);
            }
            let delay = self.config.backoff_base.saturating_mul(1u32 << attempt.min(16));
            log::debug!("retrying {url} in {delay:?} after {failure}");
            std::thread::sleep(delay);
            attempt += 1;
        }
    }

    pub fn extract(&self, page: &Page, keyword: &str) -> Result<Vec<HarvestRecord>, HarvestError> {
        extract_sentences(page, keyword, self.config.top_m, &self.config.container)
    }

    /// Fetches and extracts for one keyword.
    pub fn harvest_keyword(&self, keyword: &str) -> Result<Vec<HarvestRecord>, HarvestError> {
        let page = self.fetch_page(keyword)?;
        self.extract(&page, keyword)
    }

    /// Harvests every keyword in list order.
    ///
    /// Keywords that yield nothing end up in `skipped`. Transport failure is
    /// only returned as an error when every keyword failed that way.
    pub fn harvest(&self, wordlist: &Wordlist) -> Result<HarvestOutput, HarvestError> {
        let words = wordlist.words();
        let results = crate::parallel_map(words, self.config.parallelism, |w| self.harvest_keyword(w));

        if let Some(Err(last)) = results.last() {
            if results.iter().all(|r| matches!(r, Err(e) if e.is_transport())) {
                return Err(last.clone());
            }
        }

        let mut out = HarvestOutput::default();
        for (keyword, result) in words.iter().zip(results) {
            match result {
                Ok(records) if records.is_empty() => out.skipped.push(SkipEntry {
                    keyword: keyword.clone(),
                    reason: "no_examples".into(),
                }),
                Ok(records) => out.records.extend(records),
                Err(e) => {
                    log::warn!("skipping {keyword}: {e}");
                    out.skipped.push(SkipEntry { keyword: keyword.clone(), reason: e.skip_reason() });
                }
            }
        }
        Ok(out)
    }
}

pub fn fetch_page(keyword: &str, config: &HarvestConfig) -> Result<Page, HarvestError> {
    Harvester::new(config.clone())?.fetch_page(keyword)
}

pub fn harvest(wordlist: &Wordlist, config: &HarvestConfig) -> Result<HarvestOutput, HarvestError> {
    Harvester::new(config.clone())?.harvest(wordlist)
}
