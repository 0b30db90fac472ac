use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FillMode, MaskFillSuggester, ModelError, NgramConfig, NgramModel, ScoredSuggestion};
use crate::corpus::Corpus;
use crate::text::split_tokens;

/// One n-gram fill-in model per class, trained on that class's texts.
///
/// A replacement `w` at position `i` scores
/// `P(w | t[i-1]) * P(t[i+1] | w)` under the bigram model (all n-grams
/// covering the slot, in general); insertion uses the same product with the
/// slot placed before `t[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSuggesters {
    models: BTreeMap<String, NgramModel>,
}

pub fn train_class_suggesters(corpus: &Corpus, config: NgramConfig) -> Result<ClassSuggesters, ModelError> {
    let mut models = BTreeMap::new();
    for (idx, label) in corpus.labels().iter().enumerate() {
        let texts: Vec<Vec<String>> = corpus.class_subset(idx).map(|e| split_tokens(&e.text)).collect();
        if texts.is_empty() {
            return Err(ModelError::Training(format!("class `{label}` has no examples")));
        }
        models.insert(label.clone(), NgramModel::fit(texts, config)?);
    }
    Ok(ClassSuggesters { models })
}

impl ClassSuggesters {
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }
}

impl MaskFillSuggester for ClassSuggesters {
    fn mask_fill(
        &self,
        tokens: &[String],
        position: usize,
        mode: FillMode,
        class: &str,
        top_n: usize,
    ) -> Result<Vec<ScoredSuggestion>, ModelError> {
        let model = self
            .models
            .get(class)
            .ok_or_else(|| ModelError::UnknownLabel(class.into()))?;
        let limit = match mode {
            FillMode::Replace => tokens.len(),
            FillMode::Insert => tokens.len() + 1,
        };
        if position >= limit {
            return Err(ModelError::InvalidRequest(format!(
                "position {position} out of range for {} tokens",
                tokens.len()
            )));
        }
        let mut padded = model.padded_with_slot(tokens, position, mode == FillMode::Insert);
        let mut scored: Vec<ScoredSuggestion> = model
            .candidate_ids()
            .map(|(id, word)| ScoredSuggestion {
                word: word.into(),
                score: model.slot_score(&mut padded, position, id),
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.word.cmp(&b.word)));
        scored.truncate(top_n);
        Ok(scored)
    }
}
