use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{word_features, Embedder, ModelError};
use crate::corpus::Corpus;
use crate::text::{split_tokens, TokenizedText};

/// A fixed-dimension word-vector table (GloVe text layout).
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    table: BTreeMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize, table: BTreeMap<String, Vec<f64>>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Format {
                line: 0,
                message: "vector dimension must be at least 1".into(),
            });
        }
        if let Some((w, v)) = table.iter().find(|(_, v)| v.len() != dim) {
            return Err(ModelError::Format {
                line: 0,
                message: format!("`{w}` has dimension {} instead of {dim}", v.len()),
            });
        }
        Ok(Self { dim, table })
    }

    /// Parses `word v1 ... vd` lines. Keys are lowercased; the first
    /// occurrence of a word wins.
    pub fn parse(source: &str) -> Result<Self, ModelError> {
        let mut dim = None;
        let mut table = BTreeMap::new();
        for (idx, line) in source.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| ModelError::Format {
                line: idx + 1,
                message: e.to_string(),
            })?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(ModelError::Format {
                        line: idx + 1,
                        message: format!("expected {d} values, found {}", values.len()),
                    })
                }
                _ => {}
            }
            table.entry(word.to_lowercase()).or_insert(values);
        }
        let dim = dim.ok_or(ModelError::Format {
            line: 0,
            message: "no vectors".into(),
        })?;
        if dim == 0 {
            return Err(ModelError::Format {
                line: 1,
                message: "vector dimension must be at least 1".into(),
            });
        }
        Ok(Self { dim, table })
    }

    /// Serializes back to the text layout, one word per line, sorted.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (word, values) in &self.table {
            out.push_str(word);
            for v in values {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.table.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    /// Mean of the vectors of the tokens found in the table, or the zero
    /// vector when none is.
    pub fn mean_of<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens {
            if let Some(v) = self.get(t.as_ref()) {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                n += 1;
            }
        }
        if n > 0 {
            acc.iter_mut().for_each(|a| *a /= n as f64);
        }
        acc
    }
}

impl Embedder for WordVectors {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        Ok(self.mean_of(&text.tokens))
    }

    fn embed_word(&self, word: &str) -> Result<Option<Vec<f64>>, ModelError> {
        Ok(self.get(word).map(<[f64]>::to_vec))
    }
}

/// Distributional word vectors from the corpus itself: coordinate `j` of a
/// word is `ln(1 + c)` where `c` counts co-occurrences with the `j`-th most
/// frequent word inside a symmetric window. Rows are L2-normalized.
pub fn train_cooccurrence_vectors(corpus: &Corpus, dim: usize, window: usize) -> Result<WordVectors, ModelError> {
    let docs: Vec<Vec<String>> = corpus
        .examples()
        .iter()
        .map(|e| word_features(&split_tokens(&e.text)).collect())
        .collect();
    let mut frequency: BTreeMap<&str, usize> = BTreeMap::new();
    for w in docs.iter().flatten() {
        *frequency.entry(w.as_str()).or_default() += 1;
    }
    if frequency.is_empty() {
        return Err(ModelError::Training("empty corpus".into()));
    }
    let mut ranked: Vec<(&str, usize)> = frequency.iter().map(|(w, c)| (*w, *c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let contexts: BTreeMap<&str, usize> = ranked
        .iter()
        .take(dim)
        .enumerate()
        .map(|(i, (w, _))| (*w, i))
        .collect();
    let dim = dim.min(contexts.len()).max(1);
    let mut counts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for doc in &docs {
        for (i, w) in doc.iter().enumerate() {
            let row = counts.entry(w.as_str()).or_insert_with(|| vec![0.0; dim]);
            let lo = i.saturating_sub(window);
            let hi = (i + window + 1).min(doc.len());
            for (j, c) in doc[lo..hi].iter().enumerate() {
                if lo + j == i {
                    continue;
                }
                if let Some(&k) = contexts.get(c.as_str()) {
                    row[k] += 1.0;
                }
            }
        }
    }
    let table = counts
        .into_iter()
        .map(|(w, row)| {
            let mut v: Vec<f64> = row.iter().map(|c| libm::log1p(*c)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            (String::from(w), v)
        })
        .collect();
    WordVectors::new(dim, table)
}
