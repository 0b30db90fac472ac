use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    CallKind, Classifier, FillMode, MaskFillSuggester, ModelError, PlausibilityScorer,
    ScoredSuggestion,
};
use crate::text::TokenizedText;

/// A cached scorer result.
#[derive(Debug, Clone, PartialEq)]
pub enum Cached {
    Proba(f64),
    Label(usize),
    Loss(f64),
    Suggestions(Vec<ScoredSuggestion>),
    Vector(Vec<f64>),
}

/// Call cache plus the expensive-call (EC) counter.
///
/// Every uncached language-model or mask-fill call costs one EC; classifier
/// and embedder calls are cached but free. Repeated identical calls are
/// served from the cache and never cost anything. With a budget set, an
/// expensive miss at `ec == budget` fails with
/// [`ModelError::BudgetExhausted`] before the scorer is invoked.
///
/// Increment-and-check happens under `&mut self`, so a ledger shared between
/// workers has to sit behind a lock.
#[derive(Debug, Clone, Default)]
pub struct EcLedger {
    budget: Option<u64>,
    ec: u64,
    cache: BTreeMap<(CallKind, String), Cached>,
    misses: BTreeMap<CallKind, u64>,
}

impl EcLedger {
    /// A ledger that refuses expensive misses beyond `budget`.
    pub fn new(budget: u64) -> Self {
        Self {
            budget: Some(budget),
            ..Self::default()
        }
    }

    /// A ledger that counts but never refuses.
    pub fn unbounded() -> Self {
        Self::default()
    }

    pub fn ec(&self) -> u64 {
        self.ec
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn set_budget(&mut self, budget: Option<u64>) {
        self.budget = budget;
    }

    pub fn is_exhausted(&self) -> bool {
        self.budget.is_some_and(|b| self.ec >= b)
    }

    /// Uncached calls made so far, per kind.
    pub fn misses(&self, kind: CallKind) -> u64 {
        self.misses.get(&kind).copied().unwrap_or(0)
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.len()
    }

    /// Serves `(kind, key)` from the cache or evaluates `thunk`, caching its
    /// result and charging one EC for expensive kinds.
    pub fn ec_guarded_call<F>(&mut self, kind: CallKind, key: String, thunk: F) -> Result<Cached, ModelError>
    where
        F: FnOnce() -> Result<Cached, ModelError>,
    {
        let slot = (kind, key);
        if let Some(hit) = self.cache.get(&slot) {
            return Ok(hit.clone());
        }
        if kind.is_expensive() {
            if let Some(budget) = self.budget {
                if self.ec >= budget {
                    return Err(ModelError::BudgetExhausted {
                        used: self.ec,
                        budget,
                    });
                }
            }
        }
        let value = thunk()?;
        if kind.is_expensive() {
            self.ec += 1;
        }
        *self.misses.entry(kind).or_default() += 1;
        self.cache.insert(slot, value.clone());
        Ok(value)
    }

    pub fn lm_loss(&mut self, scorer: &dyn PlausibilityScorer, text: &TokenizedText) -> Result<f64, ModelError> {
        match self.ec_guarded_call(CallKind::Lm, text.detokenized(), || {
            scorer.lm_loss(text).map(Cached::Loss)
        })? {
            Cached::Loss(v) => Ok(v),
            other => Err(mismatch(CallKind::Lm, &other)),
        }
    }

    pub fn mask_fill(
        &mut self,
        suggester: &dyn MaskFillSuggester,
        tokens: &[String],
        position: usize,
        mode: FillMode,
        class: &str,
        top_n: usize,
    ) -> Result<Vec<ScoredSuggestion>, ModelError> {
        let key = format!(
            "{class}\u{1f}{}\u{1f}{position}\u{1f}{top_n}\u{1f}{}",
            mode.as_str(),
            tokens.join(" ")
        );
        match self.ec_guarded_call(CallKind::MaskFill, key, || {
            suggester
                .mask_fill(tokens, position, mode, class, top_n)
                .map(Cached::Suggestions)
        })? {
            Cached::Suggestions(v) => Ok(v),
            other => Err(mismatch(CallKind::MaskFill, &other)),
        }
    }

    pub fn classify_proba(
        &mut self,
        classifier: &dyn Classifier,
        text: &TokenizedText,
        label: usize,
    ) -> Result<f64, ModelError> {
        let key = format!("proba\u{1f}{label}\u{1f}{}", text.key());
        match self.ec_guarded_call(CallKind::Classifier, key, || {
            classifier.classify_proba(text, label).map(Cached::Proba)
        })? {
            Cached::Proba(v) => Ok(v),
            other => Err(mismatch(CallKind::Classifier, &other)),
        }
    }

    pub fn predict(&mut self, classifier: &dyn Classifier, text: &TokenizedText) -> Result<usize, ModelError> {
        let key = format!("predict\u{1f}{}", text.key());
        match self.ec_guarded_call(CallKind::Classifier, key, || {
            classifier.predict(text).map(Cached::Label)
        })? {
            Cached::Label(v) => Ok(v),
            other => Err(mismatch(CallKind::Classifier, &other)),
        }
    }
}

fn mismatch(kind: CallKind, got: &Cached) -> ModelError {
    ModelError::InvalidRequest(format!("cache entry for {kind} holds {got:?}"))
}
