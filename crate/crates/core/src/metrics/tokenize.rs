use serde::{Deserialize, Serialize};

/// A case-folded token list produced by [`tokenize`].
///
/// Every metric in this crate consumes `TokenSequence`s, so lengths such as
/// `len(prediction)` in the BLEU brevity term are always token counts under
/// one canonical tokenization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// True when `needle` occurs as a contiguous run of whole tokens.
    pub fn contains_run(&self, needle: &TokenSequence) -> bool {
        if needle.is_empty() {
            return false;
        }
        self.tokens
            .windows(needle.len())
            .any(|w| w == needle.tokens.as_slice())
    }
}

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Splits text into lowercase tokens.
///
/// Runs of alphanumeric characters form words; every other non-whitespace
/// character (punctuation, symbols) becomes a token of its own.
///
/// ```
/// let t = kic::metrics::tokenize("Don't  stop");
/// assert_eq!(t.tokens(), ["don", "'", "t", "stop"]);
/// ```
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
        } else if is_punctuation(c) {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            tokens.push(c.to_lowercase().collect());
        } else {
            word.extend(c.to_lowercase());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenSequence { tokens }
}
