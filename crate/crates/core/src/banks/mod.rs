//! Differentiating-words banks.
//!
//! Preprocessing first picks the parts of speech whose per-class word
//! embeddings have significantly different means (one-way MANOVA), then, for
//! each class and each such POS, keeps the `k` words most significantly
//! over-represented in that class.

mod binomial;
mod manova;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use binomial::overrepresentation_test;
pub use manova::{
    manova_permutation_test, manova_pillai, manova_pillai_with, pillai_trace, ManovaMethod,
    ManovaResult, DEFAULT_SEED, DEFAULT_SHUFFLES,
};

use crate::corpus::TaggedCorpus;
use crate::models::{Embedder, ModelError};
use crate::text::PosTag;

/// Significance level for both the POS selection and the bank filter.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BankError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("malformed bank key `{0}`, expected `class/pos`")]
    Key(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub word: String,
    pub p_value: f64,
}

/// Words that differentiate one class, for one POS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBank {
    pub class: String,
    pub pos: PosTag,
    /// Ascending by p-value.
    pub entries: Vec<BankEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosSelection {
    pub differentiating: BTreeSet<PosTag>,
    pub p_values: BTreeMap<PosTag, f64>,
}

impl PosSelection {
    pub fn from_p_values(p_values: BTreeMap<PosTag, f64>, alpha: f64) -> Self {
        let differentiating = p_values
            .iter()
            .filter(|(_, p)| **p < alpha)
            .map(|(t, _)| *t)
            .collect();
        Self {
            differentiating,
            p_values,
        }
    }

    pub fn contains(&self, tag: PosTag) -> bool {
        self.differentiating.contains(&tag)
    }
}

/// All banks of a training set, keyed by `(class, pos)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordBanks {
    banks: BTreeMap<(String, PosTag), WordBank>,
}

impl WordBanks {
    pub fn get(&self, class: &str, pos: PosTag) -> Option<&WordBank> {
        self.banks.get(&(String::from(class), pos))
    }

    pub fn iter(&self) -> impl Iterator<Item = &WordBank> {
        self.banks.values()
    }

    pub fn len(&self) -> usize {
        self.banks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks.is_empty()
    }

    pub fn insert(&mut self, bank: WordBank) {
        self.banks.insert((bank.class.clone(), bank.pos), bank);
    }

    /// `"class/pos" -> entries`, the on-disk layout.
    pub fn to_map(&self) -> BTreeMap<String, Vec<BankEntry>> {
        self.banks
            .values()
            .map(|b| (format!("{}/{}", b.class, b.pos), b.entries.clone()))
            .collect()
    }

    pub fn from_map(map: BTreeMap<String, Vec<BankEntry>>) -> Result<Self, BankError> {
        let mut banks = WordBanks::default();
        for (key, entries) in map {
            let (class, pos) = key.rsplit_once('/').ok_or_else(|| BankError::Key(key.clone()))?;
            let pos: PosTag = pos.parse().map_err(|_| BankError::Key(key.clone()))?;
            banks.insert(WordBank {
                class: class.into(),
                pos,
                entries,
            });
        }
        Ok(banks)
    }
}

/// Word counts per class, over lowercased word tokens.
struct ClassCounts {
    /// `(class, pos) -> word -> count`
    by_pos: BTreeMap<(usize, PosTag), BTreeMap<String, u64>>,
    class_totals: Vec<u64>,
    overall: BTreeMap<String, u64>,
}

fn count_words(corpus: &TaggedCorpus) -> ClassCounts {
    let mut by_pos: BTreeMap<(usize, PosTag), BTreeMap<String, u64>> = BTreeMap::new();
    let mut class_totals = alloc::vec![0u64; corpus.labels.len()];
    let mut overall: BTreeMap<String, u64> = BTreeMap::new();
    for (text, label) in &corpus.texts {
        for (token, tag) in text.tokens.iter().zip(&text.pos_tags) {
            if *tag == PosTag::Punctuation {
                continue;
            }
            let word = token.to_lowercase();
            class_totals[*label] += 1;
            *overall.entry(word.clone()).or_default() += 1;
            *by_pos.entry((*label, *tag)).or_default().entry(word).or_default() += 1;
        }
    }
    ClassCounts {
        by_pos,
        class_totals,
        overall,
    }
}

/// Builds one bank per (class, differentiating POS). A word enters a bank
/// when its over-representation p-value is below `alpha`; banks keep the `k`
/// lowest p-values, ties broken by higher in-class count, then alphabetically.
pub fn build_word_banks(corpus: &TaggedCorpus, selection: &PosSelection, k: usize, alpha: f64) -> WordBanks {
    let counts = count_words(corpus);
    let overall_total: u64 = counts.class_totals.iter().sum();
    let mut banks = WordBanks::default();
    for (class_idx, class) in corpus.labels.iter().enumerate() {
        for &pos in &selection.differentiating {
            let mut scored: Vec<(f64, u64, &str)> = Vec::new();
            if let Some(words) = counts.by_pos.get(&(class_idx, pos)) {
                for (word, &in_class) in words {
                    let overall = counts.overall[word];
                    let p = overrepresentation_test(
                        in_class,
                        counts.class_totals[class_idx],
                        overall,
                        overall_total,
                    )
                    .expect("counts are consistent by construction");
                    if p < alpha {
                        scored.push((p, in_class, word));
                    }
                }
            }
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
            scored.truncate(k);
            banks.insert(WordBank {
                class: class.clone(),
                pos,
                entries: scored
                    .into_iter()
                    .map(|(p_value, _, word)| BankEntry {
                        word: word.into(),
                        p_value,
                    })
                    .collect(),
            });
        }
    }
    banks
}

/// Runs MANOVA on the per-class embeddings of each POS's word types.
///
/// A POS needs words in at least two classes and at least `d + g + 2`
/// embedded word types in total to be tested; untested tags are absent from
/// the p-value map and never differentiating.
pub fn select_differentiating_pos(
    corpus: &TaggedCorpus,
    embedder: &dyn Embedder,
    alpha: f64,
) -> Result<PosSelection, ModelError> {
    let counts = count_words(corpus);
    let d = embedder.dim();
    let mut p_values = BTreeMap::new();
    for pos in PosTag::ALL {
        if pos == PosTag::Punctuation {
            continue;
        }
        let mut groups: Vec<Vec<Vec<f64>>> = Vec::new();
        for class_idx in 0..corpus.labels.len() {
            let Some(words) = counts.by_pos.get(&(class_idx, pos)) else {
                continue;
            };
            let mut vectors = Vec::new();
            for word in words.keys() {
                if let Some(v) = embedder.embed_word(word)? {
                    vectors.push(v);
                }
            }
            if !vectors.is_empty() {
                groups.push(vectors);
            }
        }
        let total: usize = groups.iter().map(Vec::len).sum();
        if groups.len() < 2 || total < d + groups.len() + 2 {
            continue;
        }
        match manova_pillai(&groups) {
            Ok(r) => {
                p_values.insert(pos, r.p_value);
            }
            Err(BankError::Argument(_)) => continue,
            Err(e) => return Err(ModelError::InvalidRequest(format!("{e}"))),
        }
    }
    Ok(PosSelection::from_p_values(p_values, alpha))
}
