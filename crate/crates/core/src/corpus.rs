//! Labelled training corpus and class balancing.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::{tokenize, PosTagger, TokenizedText};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("empty dataset")]
    Empty,
    #[error("a corpus needs at least two labels, found {0}")]
    TooFewLabels(usize),
    #[error("label index {index} out of range for {labels} labels")]
    LabelOutOfRange { index: usize, labels: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    /// Index into [`Corpus::labels`].
    pub label: usize,
}

/// Raw labelled texts plus the ordered label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    examples: Vec<Example>,
    labels: Vec<String>,
}

impl Corpus {
    /// Builds a corpus from `(text, label)` pairs; labels are ordered by
    /// first appearance.
    pub fn from_pairs<I, T, L>(pairs: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (T, L)>,
        T: Into<String>,
        L: AsRef<str>,
    {
        let mut labels: Vec<String> = Vec::new();
        let mut examples = Vec::new();
        for (text, label) in pairs {
            let label = label.as_ref();
            let idx = match labels.iter().position(|l| l == label) {
                Some(i) => i,
                None => {
                    labels.push(label.into());
                    labels.len() - 1
                }
            };
            examples.push(Example {
                text: text.into(),
                label: idx,
            });
        }
        if examples.is_empty() {
            return Err(CorpusError::Empty);
        }
        Self::new(labels, examples)
    }

    /// Builds a corpus with an explicit label set. Labels may have no examples.
    pub fn new(labels: Vec<String>, examples: Vec<Example>) -> Result<Self, CorpusError> {
        if labels.len() < 2 {
            return Err(CorpusError::TooFewLabels(labels.len()));
        }
        if let Some(e) = examples.iter().find(|e| e.label >= labels.len()) {
            return Err(CorpusError::LabelOutOfRange {
                index: e.label,
                labels: labels.len(),
            });
        }
        Ok(Self { examples, labels })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.labels.len()];
        for e in &self.examples {
            counts[e.label] += 1;
        }
        counts
    }

    /// Keeps the examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Examples of one class.
    pub fn class_subset(&self, label: usize) -> impl Iterator<Item = &Example> + '_ {
        self.examples.iter().filter(move |e| e.label == label)
    }

    pub fn tagged(&self, tagger: &dyn PosTagger) -> TaggedCorpus {
        TaggedCorpus {
            labels: self.labels.clone(),
            texts: self
                .examples
                .iter()
                .map(|e| (tokenize(&e.text, tagger), e.label))
                .collect(),
        }
    }
}

/// Randomly undersamples every class down to the smallest class count.
/// Surviving examples keep their original relative order.
pub fn balance_classes(corpus: &Corpus, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in corpus.examples.iter().enumerate() {
        by_class.entry(e.label).or_default().push(i);
    }
    let target = (0..corpus.labels.len())
        .map(|l| by_class.get(&l).map_or(0, Vec::len))
        .min()
        .unwrap_or(0);
    let mut keep = Vec::new();
    for indices in by_class.values_mut() {
        indices.shuffle(&mut rng);
        keep.extend_from_slice(&indices[..target]);
    }
    keep.sort_unstable();
    corpus.subset(&keep)
}

/// A corpus with every text tokenized and tagged.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedCorpus {
    pub labels: Vec<String>,
    pub texts: Vec<(TokenizedText, usize)>,
}
