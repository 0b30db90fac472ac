//! Distances between an original text and a candidate, usable as the search
//! cost `g`. All three normalize by the token count of the original, so they
//! are not symmetric once normalized.

mod tree;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::models::{Embedder, ModelError};
use crate::text::TokenizedText;

pub use tree::{build_shallow_tree, zhang_shasha, LabeledTree, ShallowParser, TreeDistance, TreeParser};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistanceError {
    #[error("distance to an empty original text is undefined")]
    EmptyOriginal,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown distance `{0}` (expected levenshtein, cosine or tree)")]
    Unknown(String),
}

/// A distance `d(x, x̂)` from the original `x` to a candidate.
pub trait DistanceFn: Sync {
    fn name(&self) -> &str;

    fn dist(&self, x: &TokenizedText, candidate: &TokenizedText) -> Result<f64, DistanceError>;
}

impl<D: DistanceFn + ?Sized> DistanceFn for Box<D> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn dist(&self, x: &TokenizedText, candidate: &TokenizedText) -> Result<f64, DistanceError> {
        (**self).dist(x, candidate)
    }
}

/// Unit-cost edit distance over token sequences.
pub fn word_levenshtein<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ta) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, tb) in b.iter().enumerate() {
            let substitute = diagonal + usize::from(ta != tb);
            diagonal = row[j + 1];
            row[j + 1] = substitute.min(row[j] + 1).min(diagonal + 1);
        }
    }
    row[b.len()]
}

/// Word-level Levenshtein divided by `|x|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Levenshtein;

impl DistanceFn for Levenshtein {
    fn name(&self) -> &str {
        "levenshtein"
    }

    fn dist(&self, x: &TokenizedText, candidate: &TokenizedText) -> Result<f64, DistanceError> {
        if x.is_empty() {
            return Err(DistanceError::EmptyOriginal);
        }
        Ok(word_levenshtein(&x.tokens, &candidate.tokens) as f64 / x.len() as f64)
    }
}

/// `(1 - cos(u, v)) / 2`, with 1 when exactly one vector is zero and 0 when
/// both are.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = libm::sqrt(u.iter().map(|a| a * a).sum());
    let nv = libm::sqrt(v.iter().map(|a| a * a).sum());
    match (nu == 0.0, nv == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => {
            if u == v {
                return 0.0;
            }
            let cos = (dot / (nu * nv)).clamp(-1.0, 1.0);
            ((1.0 - cos) / 2.0).clamp(0.0, 1.0)
        }
    }
}

/// Normalized cosine distance between embeddings.
pub struct Cosine<E> {
    pub embedder: E,
}

impl<E: Embedder> Cosine<E> {
    pub fn new(embedder: E) -> Self {
        Self { embedder }
    }
}

impl<E: Embedder> DistanceFn for Cosine<E> {
    fn name(&self) -> &str {
        "cosine"
    }

    fn dist(&self, x: &TokenizedText, candidate: &TokenizedText) -> Result<f64, DistanceError> {
        if x.key() == candidate.key() {
            return Ok(0.0);
        }
        let u = self.embedder.embed(x)?;
        let v = self.embedder.embed(candidate)?;
        Ok(cosine_distance(&u, &v))
    }
}

pub const DISTANCE_KEYS: [&str; 3] = ["levenshtein", "cosine", "tree"];

/// Builds a distance from its configuration key.
pub fn distance_by_key<'a>(key: &str, embedder: &'a dyn Embedder) -> Result<Box<dyn DistanceFn + 'a>, DistanceError> {
    match key {
        "levenshtein" | "lev" => Ok(Box::new(Levenshtein)),
        "cosine" => Ok(Box::new(Cosine::new(embedder))),
        "tree" => Ok(Box::new(TreeDistance::new(ShallowParser))),
        other => Err(DistanceError::Unknown(other.into())),
    }
}
