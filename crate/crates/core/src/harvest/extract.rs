use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};

use super::{HarvestError, HarvestRecord};
use crate::metrics::tokenize;

pub const MIN_SENTENCE_TOKENS: usize = 3;
pub const MAX_SENTENCE_TOKENS: usize = 128;

/// The element/class pair that wraps one example sentence on a page,
/// written `element.class` (default `div.src`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerSelector {
    element: String,
    class: String,
}

impl ContainerSelector {
    pub fn new(element: &str, class: &str) -> Result<Self, String> {
        let ident = |s: &str| {
            !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        };
        if !ident(element) || !ident(class) {
            return Err(format!("invalid container selector {element:?}.{class:?}"));
        }
        Ok(Self { element: element.to_string(), class: class.to_string() })
    }

    fn selector(&self) -> Selector {
        Selector::parse(&self.to_string()).expect("validated identifiers always form a selector")
    }
}

impl Default for ContainerSelector {
    fn default() -> Self {
        Self { element: "div".into(), class: "src".into() }
    }
}

impl fmt::Display for ContainerSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.element, self.class)
    }
}

impl FromStr for ContainerSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (element, class) = s
            .split_once('.')
            .ok_or_else(|| format!("container selector {s:?} must look like element.class"))?;
        Self::new(element, class)
    }
}

/// A fetched page body with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub url: String,
    pub body: String,
    pub fetched_at: DateTime<Utc>,
}

/// True when `sentence` is a usable context for `keyword`: it contains the
/// keyword as whole tokens and has an acceptable token length.
pub fn is_valid_context(sentence: &str, keyword: &str) -> bool {
    let tokens = tokenize(sentence);
    (MIN_SENTENCE_TOKENS..=MAX_SENTENCE_TOKENS).contains(&tokens.len())
        && tokens.contains_run(&tokenize(keyword))
}

/// Pulls up to `top_m` example sentences for `keyword` out of a page, in page order.
///
/// Markup inside a container is flattened to text, entities are decoded and
/// whitespace runs collapse to single spaces. Sentences that fail
/// [`is_valid_context`] are dropped.
pub fn extract_sentences(
    page: &Page,
    keyword: &str,
    top_m: usize,
    container: &ContainerSelector,
) -> Result<Vec<HarvestRecord>, HarvestError> {
    let document = Html::parse_document(&page.body);
    let selector = container.selector();
    let mut found_container = false;
    let mut records = Vec::new();
    for element in document.select(&selector) {
        found_container = true;
        if records.len() == top_m {
            break;
        }
        let text: String = element.text().collect();
        let sentence = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if is_valid_context(&sentence, keyword) {
            records.push(HarvestRecord {
                keyword: keyword.to_string(),
                sentence,
                source_url: page.url.clone(),
                fetched_at: page.fetched_at,
            });
        }
    }
    if !found_container {
        return Err(HarvestError::Parse {
            url: page.url.clone(),
            message: format!("no {container} elements found"),
        });
    }
    Ok(records)
}
