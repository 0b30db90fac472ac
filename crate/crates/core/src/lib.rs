//! Search-based counterfactual explanations for black-box text classifiers.
//!
//! Given a classifier, an input text, a target class and a confidence
//! threshold, the search looks for a plausible text of the target class that
//! minimizes a user-chosen distance to the input. The search is anytime: it
//! starts from the closest valid text in the training set and improves on it
//! with a sequence of weighted-A* iterations whose heuristic weight halves
//! every round.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the remote scorer
//! client and the command line live in the `tce` companion crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod banks;
pub mod corpus;
pub mod distance;
mod linalg;
pub mod models;
pub mod operators;
pub mod search;
mod serde_pairs;
pub mod stats;
pub mod text;

pub use corpus::{Corpus, CorpusError, Example, TaggedCorpus};
pub use models::{
    CallKind, Classifier, EcLedger, Embedder, FillMode, MaskFillSuggester, ModelError,
    PlausibilityScorer, ScoredSuggestion,
};
pub use search::{CounterfactualResult, SearchConfig, SearchProblem, Source};
pub use text::{PosLexicon, PosTag, PosTagger, TokenizedText};
