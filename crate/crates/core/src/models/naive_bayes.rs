use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{word_features, Classifier, ModelError};
use crate::corpus::Corpus;
use crate::text::{split_tokens, TokenizedText};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesConfig {
    pub vocab_cap: usize,
    /// Additive (Laplace) smoothing of word counts.
    pub smoothing: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        Self {
            vocab_cap: 20_000,
            smoothing: 1.0,
        }
    }
}

/// Multinomial naive Bayes over lowercased bag-of-words features.
/// Words outside the vocabulary are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    labels: Vec<String>,
    vocab: BTreeMap<String, usize>,
    log_prior: Vec<f64>,
    /// `log_likelihood[class][word]`
    log_likelihood: Vec<Vec<f64>>,
}

pub fn train_naive_bayes(corpus: &Corpus, config: NaiveBayesConfig) -> Result<NaiveBayes, ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::Training("empty corpus".into()));
    }
    let n_classes = corpus.labels().len();
    let docs: Vec<(Vec<String>, usize)> = corpus
        .examples()
        .iter()
        .map(|e| (word_features(&split_tokens(&e.text)).collect(), e.label))
        .collect();

    let mut frequency: BTreeMap<&str, usize> = BTreeMap::new();
    for (words, _) in &docs {
        for w in words {
            *frequency.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = frequency.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(config.vocab_cap);
    let mut words: Vec<&str> = ranked.into_iter().map(|(w, _)| w).collect();
    words.sort_unstable();
    let vocab: BTreeMap<String, usize> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (String::from(*w), i))
        .collect();

    let mut doc_counts = vec![0usize; n_classes];
    let mut word_counts = vec![vec![0f64; vocab.len()]; n_classes];
    for (words, label) in &docs {
        doc_counts[*label] += 1;
        for w in words {
            if let Some(&i) = vocab.get(w) {
                word_counts[*label][i] += 1.0;
            }
        }
    }
    let total_docs = docs.len() as f64;
    let log_prior = doc_counts
        .iter()
        .map(|&c| libm::log(c as f64 / total_docs))
        .collect();
    let v = vocab.len() as f64;
    let log_likelihood = word_counts
        .iter()
        .map(|counts| {
            let total: f64 = counts.iter().sum();
            let denom = total + config.smoothing * v;
            counts
                .iter()
                .map(|&c| libm::log((c + config.smoothing) / denom))
                .collect()
        })
        .collect();
    Ok(NaiveBayes {
        labels: corpus.labels().to_vec(),
        vocab,
        log_prior,
        log_likelihood,
    })
}

impl NaiveBayes {
    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }

    /// Posterior over classes for raw tokens.
    pub fn posterior(&self, tokens: &[String]) -> Vec<f64> {
        let mut scores = self.log_prior.clone();
        for w in word_features(tokens) {
            if let Some(&i) = self.vocab.get(&w) {
                for (c, s) in scores.iter_mut().enumerate() {
                    *s += self.log_likelihood[c][i];
                }
            }
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for s in scores.iter_mut() {
            *s = libm::exp(*s - max);
            sum += *s;
        }
        scores.iter_mut().for_each(|s| *s /= sum);
        scores
    }
}

impl Classifier for NaiveBayes {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn probabilities(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        Ok(self.posterior(&text.tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{tokenize, PosLexicon};
    use proptest::prelude::*;

    fn tt(s: &str) -> TokenizedText {
        tokenize(s, &PosLexicon::builtin())
    }

    #[test]
    fn hand_computed_posterior() {
        let c = Corpus::from_pairs([("good good", "pos"), ("bad bad", "neg")]).unwrap();
        let nb = train_naive_bayes(&c, NaiveBayesConfig::default()).unwrap();
        // P(good|pos) = 3/4, P(good|neg) = 1/4, equal priors
        let p = nb.classify_proba(&tt("good"), 0).unwrap();
        assert!((p - 0.75).abs() < 1e-12);
        assert_eq!(nb.predict(&tt("good")).unwrap(), 0);
        assert_eq!(nb.predict(&tt("bad")).unwrap(), 1);
    }

    #[test]
    fn unseen_tokens_give_priors() {
        let c = Corpus::from_pairs([("good", "pos"), ("good fun", "pos"), ("bad", "neg")]).unwrap();
        let nb = train_naive_bayes(&c, NaiveBayesConfig::default()).unwrap();
        let p = nb.probabilities(&tt("zebra quux")).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vocab_cap_keeps_most_frequent() {
        let c = Corpus::from_pairs([("a a a b b c", "x"), ("a b", "y")]).unwrap();
        let nb = train_naive_bayes(&c, NaiveBayesConfig { vocab_cap: 2, smoothing: 1.0 }).unwrap();
        assert_eq!(nb.vocabulary_size(), 2);
        let prior = nb.probabilities(&tt("")).unwrap();
        assert_eq!(nb.probabilities(&tt("c")).unwrap(), prior);
    }

    #[test]
    fn duplication_invariance_without_smoothing() {
        // Add-one smoothing is not count-ratio invariant; the unsmoothed
        // estimator is, as long as no count is zero.
        let pairs = [("good fun bad", "pos"), ("good good bad", "pos"), ("bad fun good", "neg")];
        let c = Corpus::from_pairs(pairs).unwrap();
        let doubled = Corpus::from_pairs(pairs.iter().chain(pairs.iter()).cloned()).unwrap();
        let cfg = NaiveBayesConfig { vocab_cap: 100, smoothing: 0.0 };
        let a = train_naive_bayes(&c, cfg).unwrap();
        let b = train_naive_bayes(&doubled, cfg).unwrap();
        for text in ["good", "bad bad fun", "fun good good", "nothing"] {
            let pa = a.probabilities(&tt(text)).unwrap();
            let pb = b.probabilities(&tt(text)).unwrap();
            for (x, y) in pa.iter().zip(&pb) {
                assert!((x - y).abs() < 1e-12, "{text}");
            }
        }
    }

    #[test]
    fn empty_text_posterior_survives_duplication_with_smoothing() {
        let pairs = [("good", "pos"), ("fine", "pos"), ("bad", "neg")];
        let c = Corpus::from_pairs(pairs).unwrap();
        let doubled = Corpus::from_pairs(pairs.iter().chain(pairs.iter()).cloned()).unwrap();
        let a = train_naive_bayes(&c, NaiveBayesConfig::default()).unwrap();
        let b = train_naive_bayes(&doubled, NaiveBayesConfig::default()).unwrap();
        let pa = a.probabilities(&tt("")).unwrap();
        let pb = b.probabilities(&tt("")).unwrap();
        assert!((pa[0] - pb[0]).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn probabilities_normalize(words in proptest::collection::vec("[a-f]{1,3}", 0..12)) {
            let c = Corpus::from_pairs([
                ("ab cd ef", "x"), ("ab ab", "y"), ("cd fa", "z"), ("ee", "x"),
            ]).unwrap();
            let nb = train_naive_bayes(&c, NaiveBayesConfig::default()).unwrap();
            let text = tt(&words.join(" ").to_string());
            let p = nb.probabilities(&text).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(nb.predict(&text).unwrap(), crate::models::argmax(&p));
        }
    }
}
