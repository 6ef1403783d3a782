//! Keyword-in-context toolkit.
//!
//! * [`harvest`] fetches concordance pages and extracts example sentences.
//! * [`dataset`] turns harvested sentences into keyword-disjoint splits.
//! * [`metrics`] implements sentence-level BLEU and METEOR.
//! * [`generation`] drives any backend that speaks the generation wire
//!   protocol with the five fixed prompt templates.
//! * [`eval`] scores backends against a split and renders report tables.
//! * [`bot`] is the chat-bot service for learning words in context.
//! * [`cli`] wires it all into the `kic` binary.
//!
//! The guide under `book/` walks through each piece; its code snippets run
//! as doctests of this crate.

pub mod bot;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod generation;
pub mod harvest;
pub mod jsonl;
pub mod metrics;

/// Maps `f` over `items` on at most `parallelism` threads, keeping order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    use rayon::prelude::*;
    if parallelism <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;
    #[doc = include_str!("../../../book/src/harvesting.md")]
    pub struct Harvesting;
    #[doc = include_str!("../../../book/src/datasets.md")]
    pub struct Datasets;
    #[doc = include_str!("../../../book/src/generation.md")]
    pub struct Generation;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/bot.md")]
    pub struct Bot;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
