//! Preprocessing output: the data split, trained built-in scorers, the POS
//! selection and the word banks, saved as one directory of files.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tce_core::banks::{build_word_banks, select_differentiating_pos, BankEntry, PosSelection, WordBanks};
use tce_core::corpus::balance_classes;
use tce_core::models::{
    train_class_suggesters, train_cooccurrence_vectors, train_naive_bayes, train_ngram_lm, ClassSuggesters, NaiveBayes,
    NaiveBayesConfig, NgramConfig, NgramLm, WordVectors,
};
use tce_core::operators::AntonymLexicon;
use tce_core::text::tokenize;
use tce_core::{Classifier, Corpus, ModelError, PosLexicon, TokenizedText};

use crate::config::RunConfig;
use crate::io::IoError;

/// Dataset indices of the explanation, training and test parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub explain: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Draws `explain_size` indices for explanation, then splits the rest into
/// training and test by `train_fraction`. Each part is sorted.
pub fn split_indices(n: usize, explain_size: usize, train_fraction: f64, seed: u64) -> Result<Split, String> {
    if explain_size + 2 > n {
        return Err(format!("{n} examples leave nothing to train on after an explanation split of {explain_size}"));
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(format!("train_fraction must lie in (0, 1], got {train_fraction}"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (explain, rest) = order.split_at(explain_size);
    let n_train = ((rest.len() as f64 * train_fraction).round() as usize).clamp(2, rest.len());
    let (train, test) = rest.split_at(n_train);
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        seed,
        explain: sorted(explain),
        train: sorted(train),
        test: sorted(test),
    })
}

pub struct Artifacts {
    pub corpus: Corpus,
    pub split: Split,
    pub classifier: NaiveBayes,
    pub lm: NgramLm,
    pub suggesters: ClassSuggesters,
    pub vectors: WordVectors,
    pub selection: PosSelection,
    pub banks: WordBanks,
    pub lexicon: PosLexicon,
    pub antonyms: AntonymLexicon,
}

const FILES: [&str; 10] = [
    "corpus.json",
    "split.json",
    "classifier.json",
    "lm.json",
    "suggesters.json",
    "vectors.txt",
    "pos_selection.json",
    "banks.json",
    "lexicon.json",
    "antonyms.json",
];

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

/// Trains everything preprocessing produces. `vectors` replaces the
/// co-occurrence vectors trained from the training split.
pub fn preprocess(
    corpus: Corpus,
    config: &RunConfig,
    lexicon: PosLexicon,
    antonyms: AntonymLexicon,
    vectors: Option<WordVectors>,
) -> Result<Artifacts, ArtifactError> {
    let split = split_indices(corpus.len(), config.explain_size, config.train_fraction, config.seed)
        .map_err(ArtifactError::Invalid)?;
    let mut train = corpus.subset(&split.train);
    if config.balance {
        train = balance_classes(&train, config.seed);
    }
    if let Some(label) = train.class_counts().iter().position(|&c| c == 0) {
        return Err(ArtifactError::Invalid(format!(
            "class `{}` has no training examples",
            corpus.labels()[label]
        )));
    }
    let classifier = train_naive_bayes(
        &train,
        NaiveBayesConfig {
            smoothing: config.nb_smoothing,
            ..NaiveBayesConfig::default()
        },
    )?;
    let ngram = NgramConfig {
        order: config.ngram_order,
        k: config.ngram_k,
    };
    let lm = train_ngram_lm(&train, ngram)?;
    let suggesters = train_class_suggesters(&train, ngram)?;
    let vectors = match vectors {
        Some(v) => v,
        None => train_cooccurrence_vectors(&train, config.vector_dim, config.vector_window)?,
    };
    let tagged = train.tagged(&lexicon);
    let selection = select_differentiating_pos(&tagged, &vectors, config.significance)?;
    let banks = build_word_banks(&tagged, &selection, config.k, config.significance);
    Ok(Artifacts {
        corpus,
        split,
        classifier,
        lm,
        suggesters,
        vectors,
        selection,
        banks,
        lexicon,
        antonyms,
    })
}

fn write(dir: &Path, name: &str, body: String) -> Result<(), IoError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| IoError::write(&path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

fn read<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, ArtifactError> {
    let path = dir.join(name);
    let source = fs::read_to_string(&path).map_err(|e| ArtifactError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&source).map_err(|e| ArtifactError::Invalid(format!("{}: {e}", path.display())))
}

impl Artifacts {
    pub fn save(&self, dir: &Path) -> Result<(), IoError> {
        fs::create_dir_all(dir).map_err(|e| IoError::write(dir, e))?;
        write(dir, FILES[0], json(&self.corpus))?;
        write(dir, FILES[1], json(&self.split))?;
        write(dir, FILES[2], json(&self.classifier))?;
        write(dir, FILES[3], json(&self.lm))?;
        write(dir, FILES[4], json(&self.suggesters))?;
        write(dir, FILES[5], self.vectors.to_text())?;
        write(dir, FILES[6], json(&self.selection))?;
        write(dir, FILES[7], json(&self.banks.to_map()))?;
        write(dir, FILES[8], json(&self.lexicon))?;
        write(dir, FILES[9], json(&self.antonyms))
    }

    pub fn load(dir: &Path) -> Result<Self, ArtifactError> {
        let vectors_path = dir.join(FILES[5]);
        let banks: std::collections::BTreeMap<String, Vec<BankEntry>> = read(dir, FILES[7])?;
        Ok(Self {
            corpus: read(dir, FILES[0])?,
            split: read(dir, FILES[1])?,
            classifier: read(dir, FILES[2])?,
            lm: read(dir, FILES[3])?,
            suggesters: read(dir, FILES[4])?,
            vectors: crate::io::load_vectors(&vectors_path)?,
            selection: read(dir, FILES[6])?,
            banks: WordBanks::from_map(banks).map_err(|e| ArtifactError::Invalid(format!("{}: {e}", FILES[7])))?,
            lexicon: read(dir, FILES[8])?,
            antonyms: read(dir, FILES[9])?,
        })
    }

    pub fn file_names() -> &'static [&'static str] {
        &FILES
    }

    pub fn labels(&self) -> &[String] {
        self.corpus.labels()
    }

    pub fn tokenize(&self, text: &str) -> TokenizedText {
        tokenize(text, &self.lexicon)
    }

    /// Training texts, the pool for default counterfactuals.
    pub fn pool(&self) -> Vec<TokenizedText> {
        self.split
            .train
            .iter()
            .map(|&i| self.tokenize(&self.corpus.examples()[i].text))
            .collect()
    }

    /// Built-in classifier accuracy on the test part.
    pub fn test_accuracy(&self) -> Option<f64> {
        if self.split.test.is_empty() {
            return None;
        }
        let hits = self
            .split
            .test
            .iter()
            .filter(|&&i| {
                let e = &self.corpus.examples()[i];
                self.classifier.predict(&self.tokenize(&e.text)).ok() == Some(e.label)
            })
            .count();
        Some(hits as f64 / self.split.test.len() as f64)
    }

    /// One line per bank: `class/pos: word (p), ...`.
    pub fn bank_summary(&self) -> Vec<String> {
        self.banks
            .iter()
            .map(|b| {
                let words: Vec<String> = b.entries.iter().map(|e| format!("{} ({:.2e})", e.word, e.p_value)).collect();
                format!("{}/{}: {}", b.class, b.pos, words.join(", "))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tce_core::text::PosTag;

    #[test]
    fn split_is_disjoint_and_seeded() {
        let s = split_indices(500, 200, 0.8, 4).unwrap();
        assert_eq!((s.explain.len(), s.train.len(), s.test.len()), (200, 240, 60));
        let mut all: Vec<usize> = s.explain.iter().chain(&s.train).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..500).collect::<Vec<_>>());
        assert_eq!(s, split_indices(500, 200, 0.8, 4).unwrap());
        assert!(split_indices(10, 9, 0.8, 0).is_err());
    }

    fn toy() -> Corpus {
        let mut pairs = Vec::new();
        for (i, noun) in ["food", "service", "movie", "plot", "staff", "room"].iter().cycle().take(18).enumerate() {
            for (adj, label) in [
                ("great", "pos"),
                ("excellent", "pos"),
                ("wonderful", "pos"),
                ("superb", "pos"),
                ("awful", "neg"),
                ("worst", "neg"),
                ("terrible", "neg"),
                ("horrible", "neg"),
            ] {
                pairs.push((format!("the {noun} was {adj} {}", ["today", "again", "now"][i % 3]), label));
            }
        }
        Corpus::from_pairs(pairs).unwrap()
    }

    fn toy_vectors() -> WordVectors {
        let mut table = std::collections::BTreeMap::new();
        let words = ["great", "excellent", "wonderful", "superb", "awful", "worst", "terrible", "horrible"];
        for (i, w) in words.iter().enumerate() {
            let s = if i < 4 { 1.0 } else { -1.0 };
            table.insert(w.to_string(), vec![s + 0.1 * (i % 3) as f64, 0.3 * (i % 2) as f64]);
        }
        WordVectors::new(2, table).unwrap()
    }

    #[test]
    fn toy_sentiment_banks_and_round_trip() {
        let config = RunConfig {
            explain_size: 8,
            train_fraction: 1.0,
            ..RunConfig::default()
        };
        let a = preprocess(toy(), &config, PosLexicon::builtin(), AntonymLexicon::default(), Some(toy_vectors())).unwrap();
        assert!(a.selection.contains(PosTag::Adjective));
        let neg = a.banks.get("neg", PosTag::Adjective).unwrap();
        assert!(neg.entries.iter().any(|e| e.word == "worst"));
        assert!(a.banks.iter().all(|b| b.entries.len() <= 10));

        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        let b = Artifacts::load(dir.path()).unwrap();
        assert_eq!(b.banks, a.banks);
        assert_eq!(b.classifier, a.classifier);
        assert_eq!(b.vectors, a.vectors);

        let again = tempfile::tempdir().unwrap();
        preprocess(toy(), &config, PosLexicon::builtin(), AntonymLexicon::default(), Some(toy_vectors()))
            .unwrap()
            .save(again.path())
            .unwrap();
        for name in Artifacts::file_names() {
            assert_eq!(fs::read(dir.path().join(name)).unwrap(), fs::read(again.path().join(name)).unwrap(), "{name}");
        }
    }
}
