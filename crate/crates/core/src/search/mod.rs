//! Anytime weighted-A* search for counterfactuals.
//!
//! States are texts, the cost of a state is its distance to the input and the
//! heuristic measures how far the classifier's target confidence is from the
//! threshold. Each iteration of the anytime loop runs a fresh best-first
//! search with a halved heuristic weight; model caches persist across
//! iterations through the shared [`EcLedger`].

mod anytime;
mod astar;

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banks::{PosSelection, WordBanks};
use crate::distance::{DistanceError, DistanceFn};
use crate::models::{Classifier, EcLedger, MaskFillSuggester, ModelError, PlausibilityScorer};
use crate::operators::{AntonymLexicon, Edit, OperatorContext, OperatorSet};
use crate::text::{PosTagger, TokenizedText};

pub use anytime::{explain, focused_search, sentence_importance, tce_search};
pub use astar::{weighted_astar, AstarRun, Scope, SearchNode, StopReason};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Distance(DistanceError),
    #[error("invalid search argument: {0}")]
    Argument(String),
}

impl From<DistanceError> for SearchError {
    fn from(e: DistanceError) -> Self {
        match e {
            DistanceError::Model(m) => SearchError::Model(m),
            other => SearchError::Distance(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub tau: f64,
    pub budget: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub top_n: usize,
    pub operators: OperatorSet,
    /// Focused search activates above this many sentences.
    pub sentence_threshold: usize,
    /// Default-counterfactual scan over a seeded sample of this size.
    pub sample_size: Option<usize>,
    pub seed: u64,
    pub iteration_node_cap: Option<usize>,
    /// The anytime loop stops once `w_h` halves below this.
    pub min_weight: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            budget: 2000,
            alpha: 0.5,
            gamma: 1.5,
            top_n: 10,
            operators: OperatorSet::full(),
            sentence_threshold: 1,
            sample_size: None,
            seed: 0,
            iteration_node_cap: None,
            min_weight: 1.0 / (1u64 << 40) as f64,
        }
    }
}

/// Read-only model handles a search needs.
#[derive(Clone, Copy)]
pub struct Models<'a> {
    pub classifier: &'a dyn Classifier,
    pub lm: &'a dyn PlausibilityScorer,
    pub suggester: &'a dyn MaskFillSuggester,
    pub tagger: &'a dyn PosTagger,
    pub banks: &'a WordBanks,
    pub selection: &'a PosSelection,
    pub antonyms: &'a AntonymLexicon,
}

/// Cooperative cancellation, polled between node expansions.
pub trait Interrupt {
    fn interrupted(&self) -> bool;
}

/// Never interrupts.
pub struct Never;

impl Interrupt for Never {
    fn interrupted(&self) -> bool {
        false
    }
}

impl Interrupt for AtomicBool {
    fn interrupted(&self) -> bool {
        self.load(Ordering::Relaxed)
    }
}

impl<I: Interrupt + ?Sized> Interrupt for &I {
    fn interrupted(&self) -> bool {
        (**self).interrupted()
    }
}

/// One explanation task: explain `x` towards class `target`.
pub struct SearchProblem<'a> {
    pub x: TokenizedText,
    /// `x` after cleaning; distances are measured between cleaned texts.
    pub x_clean: TokenizedText,
    pub target: usize,
    pub distance: &'a dyn DistanceFn,
    pub models: Models<'a>,
    pub config: SearchConfig,
}

impl<'a> SearchProblem<'a> {
    pub fn new(
        x: TokenizedText,
        target: usize,
        distance: &'a dyn DistanceFn,
        models: Models<'a>,
        config: SearchConfig,
    ) -> Result<Self, SearchError> {
        let labels = models.classifier.labels().len();
        if target >= labels {
            return Err(SearchError::Argument(alloc::format!(
                "target index {target} out of range for {labels} labels"
            )));
        }
        if !(config.tau > 0.0 && config.tau <= 1.0) {
            return Err(SearchError::Argument(alloc::format!("tau must lie in (0, 1], got {}", config.tau)));
        }
        let x_clean = x.cleaned(models.tagger);
        Ok(Self {
            x,
            x_clean,
            target,
            distance,
            models,
            config,
        })
    }

    pub fn target_label(&self) -> &str {
        &self.models.classifier.labels()[self.target]
    }

    /// `g(t) = d(clean(x), clean(t))`.
    pub fn cost(&self, text: &TokenizedText) -> Result<f64, SearchError> {
        let cleaned = text.cleaned(self.models.tagger);
        Ok(self.distance.dist(&self.x_clean, &cleaned)?)
    }

    pub(crate) fn operator_context(&self) -> OperatorContext<'_> {
        OperatorContext {
            target: self.target_label(),
            suggester: self.models.suggester,
            banks: self.models.banks,
            selection: self.models.selection,
            antonyms: self.models.antonyms,
            tagger: self.models.tagger,
            alpha: self.config.alpha,
            top_n: self.config.top_n,
            operators: self.config.operators,
        }
    }
}

/// `h(t) = max(0, (τ - σ) / τ)`.
pub fn heuristic(sigma: f64, tau: f64) -> f64 {
    ((tau - sigma) / tau).max(0.0)
}

/// Whether the classifier predicts `target` for `text` with confidence above
/// `tau`. Returns the target confidence alongside.
pub fn goal_test(
    classifier: &dyn Classifier,
    ledger: &mut EcLedger,
    text: &TokenizedText,
    target: usize,
    tau: f64,
) -> Result<(bool, f64), ModelError> {
    let sigma = ledger.classify_proba(classifier, text, target)?;
    let goal = sigma > tau && ledger.predict(classifier, text)? == target;
    Ok((goal, sigma))
}

pub fn is_goal(problem: &SearchProblem<'_>, ledger: &mut EcLedger, text: &TokenizedText) -> Result<bool, ModelError> {
    goal_test(problem.models.classifier, ledger, text, problem.target, problem.config.tau).map(|(g, _)| g)
}

/// Where a result came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Search,
    Default,
    None,
}

/// An improvement of the best-so-far distance and the EC spent when it was
/// found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub ec: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub original: String,
    pub counterfactual: Option<String>,
    pub source: Source,
    /// The classifier's label for the original.
    pub original_label: String,
    pub target_label: String,
    pub distance: Option<f64>,
    pub target_proba: Option<f64>,
    pub plausibility_ratio: Option<f64>,
    pub ec_used: u64,
    pub w_h_at_solution: Option<f64>,
    pub edit_trace: Vec<Edit>,
    pub history: Vec<Improvement>,
}

impl CounterfactualResult {
    /// Best-so-far distance once `ec` expensive calls had been spent.
    pub fn distance_at(&self, ec: u64) -> Option<f64> {
        self.history.iter().take_while(|i| i.ec <= ec).last().map(|i| i.distance)
    }

    /// The explanation sentence, when a counterfactual exists.
    pub fn explanation(&self) -> Option<String> {
        let cf = self.counterfactual.as_ref()?;
        Some(alloc::format!(
            "If {} had been changed to {}, the classification would have changed from {} to {}",
            self.original,
            cf,
            self.original_label,
            self.target_label
        ))
    }
}

/// A training text that already is a counterfactual.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultCounterfactual {
    pub index: usize,
    pub text: TokenizedText,
    pub distance: f64,
    pub target_proba: f64,
}

/// The closest goal text among `pool` (or a seeded sample of it). Ties keep
/// the earliest text.
pub fn default_counterfactual(
    problem: &SearchProblem<'_>,
    pool: &[TokenizedText],
    ledger: &mut EcLedger,
) -> Result<Option<DefaultCounterfactual>, SearchError> {
    let indices: Vec<usize> = match problem.config.sample_size {
        Some(n) if n < pool.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(problem.config.seed);
            let mut picked = sample(&mut rng, pool.len(), n).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..pool.len()).collect(),
    };
    let mut best: Option<DefaultCounterfactual> = None;
    for i in indices {
        let text = &pool[i];
        let (goal, sigma) = goal_test(problem.models.classifier, ledger, text, problem.target, problem.config.tau)?;
        if !goal {
            continue;
        }
        let d = problem.cost(text)?;
        if best.as_ref().is_none_or(|b| d < b.distance) {
            best = Some(DefaultCounterfactual {
                index: i,
                text: text.clone(),
                distance: d,
                target_proba: sigma,
            });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests;
