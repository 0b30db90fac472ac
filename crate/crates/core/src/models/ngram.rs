use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ModelError, PlausibilityScorer};
use crate::corpus::Corpus;
use crate::text::{split_tokens, TokenizedText};

pub(crate) const START: &str = "<s>";
pub(crate) const UNKNOWN: &str = "<unk>";
const START_ID: u32 = 0;
const UNKNOWN_ID: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    /// 2 (bigram) or 3 (trigram).
    pub order: usize,
    /// Additive smoothing constant.
    pub k: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self { order: 2, k: 0.1 }
    }
}

/// Add-k smoothed n-gram counts over lowercased tokens, with start padding
/// and an unknown-word symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramModel {
    config: NgramConfig,
    vocab: BTreeMap<String, u32>,
    words: Vec<String>,
    #[serde(with = "crate::serde_pairs")]
    counts: BTreeMap<Vec<u32>, u32>,
    #[serde(with = "crate::serde_pairs")]
    context_counts: BTreeMap<Vec<u32>, u32>,
}

impl NgramModel {
    pub fn fit<I>(sequences: I, config: NgramConfig) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        if !(2..=3).contains(&config.order) {
            return Err(ModelError::Training(alloc::format!(
                "n-gram order must be 2 or 3, got {}",
                config.order
            )));
        }
        let sequences: Vec<Vec<String>> = sequences
            .into_iter()
            .map(|s| s.iter().map(|t| t.to_lowercase()).collect())
            .collect();
        if sequences.iter().all(Vec::is_empty) {
            return Err(ModelError::Training("empty corpus".into()));
        }
        let mut distinct: Vec<&str> = sequences.iter().flatten().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        let mut words = alloc::vec![START.to_string(), UNKNOWN.to_string()];
        words.extend(
            distinct
                .into_iter()
                .filter(|w| *w != START && *w != UNKNOWN)
                .map(String::from),
        );
        let vocab = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let mut model = NgramModel {
            config,
            vocab,
            words,
            counts: BTreeMap::new(),
            context_counts: BTreeMap::new(),
        };
        for seq in &sequences {
            let padded = model.padded(seq);
            for window in padded.windows(config.order) {
                *model.counts.entry(window.to_vec()).or_default() += 1;
                *model
                    .context_counts
                    .entry(window[..config.order - 1].to_vec())
                    .or_default() += 1;
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Vocabulary size used by the smoothing: every word plus `<unk>`.
    fn smoothing_vocab(&self) -> f64 {
        (self.words.len() - 1) as f64
    }

    pub(crate) fn encode(&self, token: &str) -> u32 {
        let lower = token.to_lowercase();
        self.vocab.get(&lower).copied().unwrap_or(UNKNOWN_ID)
    }

    fn padded<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        let mut out = alloc::vec![START_ID; self.config.order - 1];
        out.extend(tokens.iter().map(|t| self.encode(t.as_ref())));
        out
    }

    /// `P(word | context)` with add-k smoothing; `context` has `order - 1` ids.
    pub(crate) fn probability(&self, context: &[u32], word: u32) -> f64 {
        let mut key = Vec::with_capacity(self.config.order);
        key.extend_from_slice(context);
        key.push(word);
        let joint = self.counts.get(&key).copied().unwrap_or(0) as f64;
        let ctx = self.context_counts.get(context).copied().unwrap_or(0) as f64;
        (joint + self.config.k) / (ctx + self.config.k * self.smoothing_vocab())
    }

    /// Mean negative log-likelihood per token; zero for an empty sequence.
    pub fn mean_nll<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        if tokens.is_empty() {
            return 0.0;
        }
        let padded = self.padded(tokens);
        let n = self.config.order;
        let total: f64 = padded
            .windows(n)
            .map(|w| -libm::log(self.probability(&w[..n - 1], w[n - 1])))
            .sum();
        total / tokens.len() as f64
    }

    /// Product of the probabilities of every n-gram that covers `slot`, with
    /// `candidate` placed there. `padded` is a sequence from
    /// [`Self::padded_with_slot`].
    pub(crate) fn slot_score(&self, padded: &mut [u32], slot: usize, candidate: u32) -> f64 {
        let n = self.config.order;
        let at = slot + n - 1;
        padded[at] = candidate;
        let last = (at + n - 1).min(padded.len() - 1);
        let mut score = 1.0;
        for j in at..=last {
            score *= self.probability(&padded[j + 1 - n..j], padded[j]);
        }
        score
    }

    /// Padded ids of `tokens` with a placeholder slot at `slot`, either
    /// replacing the token there or inserted before it.
    pub(crate) fn padded_with_slot(&self, tokens: &[String], slot: usize, insert: bool) -> Vec<u32> {
        let mut ids = self.padded(tokens);
        let at = slot + self.config.order - 1;
        if insert {
            ids.insert(at, UNKNOWN_ID);
        }
        ids
    }

    /// Ids of real words that can be proposed as fills.
    pub(crate) fn candidate_ids(&self) -> impl Iterator<Item = (u32, &str)> + '_ {
        self.words
            .iter()
            .enumerate()
            .skip(2)
            .filter(|(_, w)| !crate::text::is_punctuation_token(w))
            .map(|(i, w)| (i as u32, w.as_str()))
    }
}

/// Plausibility scorer backed by an [`NgramModel`] over the whole corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramLm {
    model: NgramModel,
}

pub fn train_ngram_lm(corpus: &Corpus, config: NgramConfig) -> Result<NgramLm, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::Training("empty corpus".into()));
    }
    let model = NgramModel::fit(corpus.examples().iter().map(|e| split_tokens(&e.text)), config)?;
    Ok(NgramLm { model })
}

impl NgramLm {
    pub fn model(&self) -> &NgramModel {
        &self.model
    }
}

impl PlausibilityScorer for NgramLm {
    fn lm_loss(&self, text: &TokenizedText) -> Result<f64, ModelError> {
        Ok(self.model.mean_nll(&text.tokens))
    }
}
