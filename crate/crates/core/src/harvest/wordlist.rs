use std::collections::HashSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WordlistError {
    #[error("{path}:{line}: {message}")]
    Invalid { path: String, line: usize, message: String },
    #[error("{path}: wordlist is empty")]
    Empty { path: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Checks that a keyword is non-empty and has no whitespace.
pub fn validate_keyword(keyword: &str) -> Result<(), String> {
    if keyword.is_empty() {
        Err("keyword is empty".into())
    } else if keyword.chars().any(char::is_whitespace) {
        Err(format!("keyword {keyword:?} contains whitespace"))
    } else {
        Ok(())
    }
}

/// Ordered, case-insensitively unique keywords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wordlist {
    words: Vec<String>,
    source_path: String,
}

impl Wordlist {
    /// Reads one word per line. Blank lines and lines starting with `#` are ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, WordlistError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| WordlistError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_path: &str) -> Result<Self, WordlistError> {
        let entries = text
            .lines()
            .enumerate()
            .map(|(idx, raw)| (idx + 1, raw.trim()))
            .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'));
        Self::from_entries(entries, source_path)
    }

    /// Builds a list in memory with the same checks as [`Wordlist::parse`].
    pub fn from_words<I, S>(words: I) -> Result<Self, WordlistError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: Vec<S> = words.into_iter().collect();
        Self::from_entries(words.iter().enumerate().map(|(i, w)| (i + 1, w.as_ref())), "<memory>")
    }

    fn from_entries<'a>(
        entries: impl Iterator<Item = (usize, &'a str)>,
        source_path: &str,
    ) -> Result<Self, WordlistError> {
        let mut words = Vec::new();
        let mut seen = HashSet::new();
        for (line, word) in entries {
            let invalid = |message: String| WordlistError::Invalid {
                path: source_path.to_string(),
                line,
                message,
            };
            validate_keyword(word).map_err(invalid)?;
            if !seen.insert(word.to_lowercase()) {
                return Err(invalid(format!("duplicate word {word:?}")));
            }
            words.push(word.to_string());
        }
        if words.is_empty() {
            return Err(WordlistError::Empty { path: source_path.to_string() });
        }
        Ok(Self { words, source_path: source_path.to_string() })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn source_path(&self) -> &str {
        &self.source_path
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
