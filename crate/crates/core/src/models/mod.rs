//! Scorer interfaces, the built-in statistical scorers and the
//! expensive-call ledger.
//!
//! Four black boxes drive the search: the classifier `σ`, a plausibility
//! language model, a per-class mask-fill suggester and an embedder. Only
//! language-model and mask-fill calls are expensive; every such call goes
//! through an [`EcLedger`] that caches it and counts uncached calls against a
//! budget.

mod ledger;
mod naive_bayes;
mod ngram;
mod suggest;
mod vectors;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::text::TokenizedText;

pub use ledger::{Cached, EcLedger};
pub use naive_bayes::{train_naive_bayes, NaiveBayes, NaiveBayesConfig};
pub use ngram::{train_ngram_lm, NgramConfig, NgramLm, NgramModel};
pub use suggest::{train_class_suggesters, ClassSuggesters};
pub use vectors::{train_cooccurrence_vectors, WordVectors};

/// The kinds of black-box call the ledger distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Classifier,
    Lm,
    MaskFill,
    Embedder,
}

impl CallKind {
    /// Whether an uncached call of this kind costs one EC.
    pub fn is_expensive(self) -> bool {
        matches!(self, CallKind::Lm | CallKind::MaskFill)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::Classifier => "classifier",
            CallKind::Lm => "lm",
            CallKind::MaskFill => "mask_fill",
            CallKind::Embedder => "embedder",
        }
    }
}

impl fmt::Display for CallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("expensive-call budget exhausted ({used}/{budget})")]
    BudgetExhausted { used: u64, budget: u64 },
    #[error("{kind} scorer at {endpoint} failed: {message}")]
    Scorer {
        endpoint: String,
        kind: CallKind,
        message: String,
    },
    #[error("training failed: {0}")]
    Training(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ModelError {
    pub fn is_budget_exhausted(&self) -> bool {
        matches!(self, ModelError::BudgetExhausted { .. })
    }
}

/// One candidate fill and its suggester score (higher is better).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSuggestion {
    pub word: String,
    pub score: f64,
}

/// Whether a mask replaces the token at a position or is inserted before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillMode {
    Replace,
    Insert,
}

impl FillMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FillMode::Replace => "replace",
            FillMode::Insert => "insert",
        }
    }
}

/// The black-box classifier `σ` over an ordered label set.
pub trait Classifier: Sync {
    fn labels(&self) -> &[String];

    /// Class probabilities in label order.
    fn probabilities(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError>;

    fn classify_proba(&self, text: &TokenizedText, label: usize) -> Result<f64, ModelError> {
        Ok(self.probabilities(text)?[label])
    }

    fn predict(&self, text: &TokenizedText) -> Result<usize, ModelError> {
        Ok(argmax(&self.probabilities(text)?))
    }
}

/// Mean per-token negative log-likelihood under a language model.
pub trait PlausibilityScorer: Sync {
    fn lm_loss(&self, text: &TokenizedText) -> Result<f64, ModelError>;
}

/// Class-conditional fill-in suggestions for a masked position.
pub trait MaskFillSuggester: Sync {
    /// Suggestions sorted by descending score, at most `top_n` of them.
    fn mask_fill(
        &self,
        tokens: &[String],
        position: usize,
        mode: FillMode,
        class: &str,
        top_n: usize,
    ) -> Result<Vec<ScoredSuggestion>, ModelError>;
}

/// Sentence and word encoder.
pub trait Embedder: Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError>;

    fn embed_word(&self, word: &str) -> Result<Option<Vec<f64>>, ModelError>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn labels(&self) -> &[String] {
        (**self).labels()
    }
    fn probabilities(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        (**self).probabilities(text)
    }
    fn classify_proba(&self, text: &TokenizedText, label: usize) -> Result<f64, ModelError> {
        (**self).classify_proba(text, label)
    }
    fn predict(&self, text: &TokenizedText) -> Result<usize, ModelError> {
        (**self).predict(text)
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn embed(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        (**self).embed(text)
    }
    fn embed_word(&self, word: &str) -> Result<Option<Vec<f64>>, ModelError> {
        (**self).embed_word(word)
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Lowercased word tokens (those with a letter or digit).
pub(crate) fn word_features(tokens: &[String]) -> impl Iterator<Item = String> + '_ {
    tokens
        .iter()
        .filter(|t| !crate::text::is_punctuation_token(t))
        .map(|t| t.to_lowercase())
}
