//! Vocabulary chat bot.
//!
//! A learner sends `/word <w>` and gets generated sentences plus real usage
//! examples for `w`; the word is remembered in a per-chat list that `/list`
//! and `/forget` manage. [`poll_loop`] runs the bot against a chat platform
//! that speaks the common bot HTTP API (`getUpdates`, `sendMessage`).

mod store;
mod telegram;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::generation::{generate_batch, GenerationBackend, GenerationError};
use crate::harvest::{validate_keyword, Harvester};

pub use store::{FileStore, ProfileStore, StoreError, StoreFile, STORE_VERSION};
pub use telegram::{poll_loop, BotApiClient, BotError, BotUpdate, PollOptions, DEFAULT_API_BASE};

pub const MAX_SAVED_WORDS: usize = 500;
pub const MAX_REPLY_CHARS: usize = 4096;
pub const GENERATED_PER_REPLY: usize = 3;
pub const EXAMPLES_PER_REPLY: usize = 2;

pub const HELP_TEXT: &str = "Learn English words in context.\n\
/word <word> - example sentences for a word, and save it to your list\n\
/list - show your saved words\n\
/forget <word> - remove a word from your list";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedWord {
    pub word: String,
    pub added_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub chat_id: i64,
    pub saved_words: Vec<SavedWord>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddOutcome {
    Added,
    AlreadySaved,
    Full,
}

impl UserProfile {
    pub fn new(chat_id: i64, now: DateTime<Utc>) -> Self {
        Self { chat_id, saved_words: Vec::new(), created_at: now }
    }

    pub fn has_word(&self, word: &str) -> bool {
        let folded = word.to_lowercase();
        self.saved_words.iter().any(|w| w.word.to_lowercase() == folded)
    }

    /// Appends `word` unless it is already saved (case-insensitively) or the list is full.
    pub fn add_word(&mut self, word: &str, now: DateTime<Utc>) -> AddOutcome {
        if self.has_word(word) {
            AddOutcome::AlreadySaved
        } else if self.saved_words.len() >= MAX_SAVED_WORDS {
            AddOutcome::Full
        } else {
            self.saved_words.push(SavedWord { word: word.to_string(), added_at: now });
            AddOutcome::Added
        }
    }

    pub fn remove_word(&mut self, word: &str) -> bool {
        let folded = word.to_lowercase();
        let before = self.saved_words.len();
        self.saved_words.retain(|w| w.word.to_lowercase() != folded);
        self.saved_words.len() != before
    }
}

/// Real-text usage examples for a word.
pub trait ExampleSource: Send + Sync {
    fn examples(&self, word: &str, limit: usize) -> Result<Vec<String>, String>;
}

impl ExampleSource for Harvester {
    fn examples(&self, word: &str, limit: usize) -> Result<Vec<String>, String> {
        let records = self.harvest_keyword(word).map_err(|e| e.to_string())?;
        Ok(records.into_iter().take(limit).map(|r| r.sentence).collect())
    }
}

/// A source with nothing to offer.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoExamples;

impl ExampleSource for NoExamples {
    fn examples(&self, _: &str, _: usize) -> Result<Vec<String>, String> {
        Ok(Vec::new())
    }
}

pub struct BotDeps<'a> {
    pub backend: &'a dyn GenerationBackend,
    pub examples: &'a dyn ExampleSource,
    pub store: &'a dyn ProfileStore,
}

/// Shortens `text` to at most [`MAX_REPLY_CHARS`] characters, cutting after
/// the last sentence end (`.`, `!`, `?` or a line break) that fits.
pub fn cap_reply(text: &str) -> String {
    if text.chars().count() <= MAX_REPLY_CHARS {
        return text.to_string();
    }
    let end = text.char_indices().nth(MAX_REPLY_CHARS).map_or(text.len(), |(i, _)| i);
    let head = &text[..end];
    let cut = head
        .char_indices()
        .rfind(|(_, c)| matches!(c, '.' | '!' | '?' | '\n'))
        .map_or(end, |(i, c)| i + c.len_utf8());
    head[..cut].trim_end().to_string()
}

enum Command<'a> {
    Word(Option<&'a str>),
    List,
    Forget(Option<&'a str>),
    Help,
}

fn parse_command(text: &str) -> Command<'_> {
    let mut parts = text.split_whitespace();
    let head = parts.next().unwrap_or("");
    let arg = parts.next();
    let extra = parts.next().is_some();
    let name = head.split('@').next().unwrap_or(head).to_lowercase();
    match name.as_str() {
        "/word" => Command::Word(arg.filter(|_| !extra)),
        "/list" => Command::List,
        "/forget" => Command::Forget(arg.filter(|_| !extra)),
        _ => Command::Help,
    }
}

const RETRY_TEXT: &str = "Sorry, I could not save that right now. Please try again in a moment.";

/// Handles one incoming message for `profile` and returns the reply and
/// the profile as it now stands. Mutations are persisted through
/// `deps.store` before returning; if that fails the original profile comes
/// back with a retry message.
pub fn handle_command(profile: &UserProfile, text: &str, deps: &BotDeps<'_>) -> (String, UserProfile) {
    let now = Utc::now();
    let (reply, updated) = match parse_command(text) {
        Command::Help => (HELP_TEXT.to_string(), None),
        Command::List => (list_reply(profile), None),
        Command::Word(None) => ("Usage: /word <word>".to_string(), None),
        Command::Forget(None) => ("Usage: /forget <word>".to_string(), None),
        Command::Word(Some(word)) if validate_keyword(word).is_err() => ("Usage: /word <word>".to_string(), None),
        Command::Word(Some(word)) => {
            let mut next = profile.clone();
            let outcome = next.add_word(word, now);
            let body = word_reply(word, outcome, next.saved_words.len(), deps);
            (body, (outcome == AddOutcome::Added).then_some(next))
        }
        Command::Forget(Some(word)) => {
            let mut next = profile.clone();
            if next.remove_word(word) {
                (format!("Removed \"{word}\" from your list."), Some(next))
            } else {
                (format!("\"{word}\" is not in your list."), None)
            }
        }
    };
    match updated {
        None => (cap_reply(&reply), profile.clone()),
        Some(next) => match deps.store.save(&next) {
            Ok(()) => (cap_reply(&reply), next),
            Err(e) => {
                log::warn!("store failed for chat {}: {e}", profile.chat_id);
                (RETRY_TEXT.to_string(), profile.clone())
            }
        },
    }
}

fn list_reply(profile: &UserProfile) -> String {
    if profile.saved_words.is_empty() {
        return "Your list is empty. Add words with /word <word>.".into();
    }
    let mut out = format!("Your words ({}):\n", profile.saved_words.len());
    for (i, w) in profile.saved_words.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, w.word));
    }
    out.trim_end().to_string()
}

fn word_reply(word: &str, outcome: AddOutcome, saved: usize, deps: &BotDeps<'_>) -> String {
    let mut out = String::new();
    match generate_batch(word, deps.backend) {
        Ok(batch) => {
            let generated: Vec<&str> = batch
                .sentences()
                .take(GENERATED_PER_REPLY)
                .map(|g| g.sentence.as_str())
                .collect();
            if !generated.is_empty() {
                out.push_str("Generated examples:\n");
                for (i, s) in generated.iter().enumerate() {
                    out.push_str(&format!("{}. {s}\n", i + 1));
                }
            }
        }
        Err(GenerationError::InvalidKeyword(_)) => return "Usage: /word <word>".into(),
        Err(e) => {
            log::warn!("generation failed for {word}: {e}");
            out.push_str("Sorry, the sentence generator is unavailable right now.\n");
        }
    }
    match deps.examples.examples(word, EXAMPLES_PER_REPLY) {
        Ok(examples) if !examples.is_empty() => {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("From real texts:\n");
            for e in examples.iter().take(EXAMPLES_PER_REPLY) {
                out.push_str(&format!("- {e}\n"));
            }
        }
        Ok(_) => {}
        Err(e) => log::warn!("example lookup failed for {word}: {e}"),
    }
    if out.is_empty() {
        out.push_str(&format!("No examples found for \"{word}\".\n"));
    }
    out.push('\n');
    out.push_str(&match outcome {
        AddOutcome::Added => format!("Saved \"{word}\" to your list ({saved} words)."),
        AddOutcome::AlreadySaved => format!("\"{word}\" is already in your list."),
        AddOutcome::Full => format!("Your list is full ({MAX_SAVED_WORDS} words). Use /forget to make room."),
    });
    out
}
