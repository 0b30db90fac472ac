use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::anytime::rank_sentences;
use super::*;
use crate::banks::{PosSelection, WordBanks};
use crate::corpus::Corpus;
use crate::distance::Levenshtein;
use crate::models::{train_naive_bayes, FillMode, NaiveBayes, NaiveBayesConfig, ScoredSuggestion};
use crate::operators::{expand, AntonymLexicon, EditKind, OperatorSet};
use crate::text::{tokenize, PosLexicon};

/// Two labels; the target's probability comes from a table keyed by the
/// token sequence.
struct TableClassifier {
    labels: Vec<String>,
    sigma: BTreeMap<String, f64>,
    fallback: f64,
}

impl TableClassifier {
    fn new(entries: &[(&str, f64)], fallback: f64) -> Self {
        Self {
            labels: vec!["src".into(), "dst".into()],
            sigma: entries.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            fallback,
        }
    }
}

impl Classifier for TableClassifier {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn probabilities(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        let s = self.sigma.get(&text.key()).copied().unwrap_or(self.fallback);
        Ok(vec![1.0 - s, s])
    }
}

/// Suggestions keyed by (token sequence, mode, position).
#[derive(Default)]
struct TableSuggester(BTreeMap<(String, FillMode, usize), Vec<String>>);

impl TableSuggester {
    fn with(mut self, text: &str, mode: FillMode, position: usize, words: &[&str]) -> Self {
        self.0
            .insert((text.into(), mode, position), words.iter().map(|w| w.to_string()).collect());
        self
    }
}

impl MaskFillSuggester for TableSuggester {
    fn mask_fill(
        &self,
        tokens: &[String],
        position: usize,
        mode: FillMode,
        _class: &str,
        top_n: usize,
    ) -> Result<Vec<ScoredSuggestion>, ModelError> {
        let words = self.0.get(&(tokens.join(" "), mode, position)).cloned().unwrap_or_default();
        Ok(words
            .into_iter()
            .take(top_n)
            .map(|word| ScoredSuggestion { word, score: 1.0 })
            .collect())
    }
}

struct ConstantLoss(f64);

impl PlausibilityScorer for ConstantLoss {
    fn lm_loss(&self, _text: &TokenizedText) -> Result<f64, ModelError> {
        Ok(self.0)
    }
}

struct World {
    suggester: TableSuggester,
    lm: ConstantLoss,
    lexicon: PosLexicon,
    banks: WordBanks,
    selection: PosSelection,
    antonyms: AntonymLexicon,
}

impl World {
    fn new(suggester: TableSuggester, antonyms: &str) -> Self {
        Self {
            suggester,
            lm: ConstantLoss(1.0),
            lexicon: PosLexicon::builtin(),
            banks: WordBanks::default(),
            selection: PosSelection::default(),
            antonyms: AntonymLexicon::parse(antonyms).unwrap(),
        }
    }

    fn models<'a>(&'a self, classifier: &'a dyn Classifier) -> Models<'a> {
        Models {
            classifier,
            lm: &self.lm,
            suggester: &self.suggester,
            tagger: &self.lexicon,
            banks: &self.banks,
            selection: &self.selection,
            antonyms: &self.antonyms,
        }
    }

    fn text(&self, s: &str) -> TokenizedText {
        tokenize(s, &self.lexicon)
    }
}

fn sentiment_nb() -> NaiveBayes {
    let corpus = Corpus::from_pairs([
        ("good movie", "pos"),
        ("good film", "pos"),
        ("bad movie", "neg"),
        ("bad film", "neg"),
    ])
    .unwrap();
    train_naive_bayes(&corpus, NaiveBayesConfig::default()).unwrap()
}

#[test]
fn heuristic_examples() {
    assert_eq!(heuristic(0.5, 0.5), 0.0);
    assert_eq!(heuristic(0.25, 0.5), 0.5);
    assert_eq!(heuristic(0.9, 0.5), 0.0);
}

#[test]
fn heuristic_grid() {
    for si in 0..=20 {
        for ti in 1..=10 {
            let (sigma, tau) = (si as f64 * 0.05, ti as f64 * 0.1);
            let h = heuristic(sigma, tau);
            assert!((0.0..=1.0).contains(&h), "σ={sigma} τ={tau}");
            assert_eq!(h == 0.0, sigma >= tau, "σ={sigma} τ={tau}");
        }
    }
}

struct Fixed(Vec<f64>, Vec<String>);

impl Classifier for Fixed {
    fn labels(&self) -> &[String] {
        &self.1
    }
    fn probabilities(&self, _text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        Ok(self.0.clone())
    }
}

#[test]
fn goal_predicate_is_strict_and_needs_argmax() {
    let w = World::new(TableSuggester::default(), "");
    let t = w.text("anything");
    let two = |p: f64| Fixed(vec![1.0 - p, p], vec!["a".into(), "b".into()]);
    let mut l = EcLedger::unbounded();
    assert!(goal_test(&two(0.6), &mut l, &t, 1, 0.5).unwrap().0);
    let mut l = EcLedger::unbounded();
    assert!(!goal_test(&two(0.5), &mut l, &t, 1, 0.5).unwrap().0);
    let three = Fixed(vec![0.1, 0.4, 0.5], vec!["a".into(), "b".into(), "c".into()]);
    let mut l = EcLedger::unbounded();
    assert!(!goal_test(&three, &mut l, &t, 1, 0.3).unwrap().0);
}

#[test]
fn default_counterfactual_is_the_closest_goal() {
    let w = World::new(TableSuggester::default(), "");
    let c = TableClassifier::new(&[("a b c d e f g h i k", 0.1), ("a b c x y z g h i k", 0.8), ("a b x d e f g h i k", 0.8)], 0.2);
    let m = w.models(&c);
    let x = w.text("a b c d e f g h i k");
    let pool: Vec<_> = ["a b c x y z g h i k", "a b x d e f g h i k", "q"].iter().map(|s| w.text(s)).collect();
    let p = SearchProblem::new(x, 1, &Levenshtein, m, SearchConfig::default()).unwrap();
    let mut l = EcLedger::unbounded();
    let d = default_counterfactual(&p, &pool, &mut l).unwrap().unwrap();
    assert_eq!(d.index, 1);
    assert!((d.distance - 0.1).abs() < 1e-12);
    assert_eq!(l.ec(), 0);

    let none = TableClassifier::new(&[], 0.2);
    let p = SearchProblem::new(w.text("a"), 1, &Levenshtein, w.models(&none), SearchConfig::default()).unwrap();
    assert!(default_counterfactual(&p, &pool, &mut EcLedger::unbounded()).unwrap().is_none());

    let config = SearchConfig {
        sample_size: Some(pool.len()),
        seed: 7,
        ..SearchConfig::default()
    };
    let p = SearchProblem::new(w.text("a b c d e f g h i k"), 1, &Levenshtein, m, config).unwrap();
    assert_eq!(default_counterfactual(&p, &pool, &mut EcLedger::unbounded()).unwrap().unwrap().index, 1);
}

#[test]
fn greedy_finds_the_single_swap_in_one_expansion() {
    let w = World::new(TableSuggester::default(), "good\tbad\n");
    let nb = sentiment_nb();
    let p = SearchProblem::new(w.text("good movie"), 1, &Levenshtein, w.models(&nb), SearchConfig::default()).unwrap();
    let mut l = EcLedger::new(100);
    let (root, goal) = SearchNode::root(&p, &mut l, p.x.clone(), 1.0, Vec::new()).unwrap();
    assert!(!goal);
    let run = weighted_astar(&p, &mut l, 1.0, &root, Scope::Whole, 1.0, &Never).unwrap();
    assert_eq!(run.expanded, 1);
    let g = run.goal.unwrap();
    assert_eq!(g.text.key(), "bad movie");
    assert_eq!(g.edits.len(), 1);
    assert_eq!(g.edits[0].kind, EditKind::AntonymSwap);
    assert_eq!(g.f, g.h);

    let run = weighted_astar(&p, &mut l, 0.0, &root, Scope::Whole, 1.0, &Never).unwrap();
    assert!(run.expanded >= 1);
    assert_eq!(run.goal.unwrap().f, 0.5);
}

#[test]
fn rejected_children_exhaust_the_open_list() {
    let w = World::new(TableSuggester::default(), "good\tbad\n");
    let nb = sentiment_nb();
    let config = SearchConfig {
        gamma: 0.5,
        ..SearchConfig::default()
    };
    let p = SearchProblem::new(w.text("good movie"), 1, &Levenshtein, w.models(&nb), config).unwrap();
    let mut l = EcLedger::unbounded();
    let (root, _) = SearchNode::root(&p, &mut l, p.x.clone(), 1.0, Vec::new()).unwrap();
    let run = weighted_astar(&p, &mut l, 1.0, &root, Scope::Whole, 1.0, &Never).unwrap();
    assert!(run.goal.is_none());
    assert_eq!(run.stop, StopReason::OpenExhausted);
}

/// Greedy follows a → z, b → w, c → v to a distance-1 goal three edits deep.
/// With `w_h = 1/2` the insert-then-remove path wins; it ends at "a y c",
/// one substitution away.
fn staged_world() -> (World, TableClassifier) {
    let suggester = TableSuggester::default()
        .with("a b c", FillMode::Replace, 0, &["z"])
        .with("a b c", FillMode::Insert, 1, &["y"])
        .with("z b c", FillMode::Replace, 1, &["w"])
        .with("z w c", FillMode::Replace, 2, &["v"]);
    let classifier = TableClassifier::new(
        &[
            ("a b c", 0.1),
            ("z b c", 0.45),
            ("a y b c", 0.35),
            ("z w c", 0.47),
            ("z w v", 0.9),
            ("a y c", 0.9),
        ],
        0.1,
    );
    (World::new(suggester, ""), classifier)
}

fn staged_problem<'a>(w: &'a World, c: &'a TableClassifier, config: SearchConfig) -> SearchProblem<'a> {
    let ops = OperatorSet {
        dwb_swap: false,
        antonym_swap: false,
        ..OperatorSet::full()
    };
    let config = SearchConfig { operators: ops, ..config };
    SearchProblem::new(w.text("a b c"), 1, &Levenshtein, w.models(c), config).unwrap()
}

#[test]
fn later_iterations_improve_on_greedy() {
    let (w, c) = staged_world();
    let p = staged_problem(&w, &c, SearchConfig::default());

    // brute force over everything two operator applications away
    let ctx = p.operator_context();
    let mut l = EcLedger::unbounded();
    let mut frontier = vec![p.x.clone()];
    let mut best_by_depth = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..2 {
        let mut next = Vec::new();
        let mut best = f64::INFINITY;
        for t in &frontier {
            for cand in expand(t, &ctx, &mut l, None).unwrap() {
                if seen.insert(cand.text.key()) {
                    if is_goal(&p, &mut l, &cand.text).unwrap() {
                        best = best.min(p.cost(&cand.text).unwrap());
                    }
                    next.push(cand.text);
                }
            }
        }
        best_by_depth.push(best);
        frontier = next;
    }
    assert_eq!(best_by_depth[0], f64::INFINITY);
    assert!((best_by_depth[1] - 1.0 / 3.0).abs() < 1e-12);

    let mut l = EcLedger::new(2000);
    let (root, _) = SearchNode::root(&p, &mut l, p.x.clone(), 1.0, Vec::new()).unwrap();
    let greedy = weighted_astar(&p, &mut l, 1.0, &root, Scope::Whole, 1.0, &Never).unwrap().goal.unwrap();
    assert_eq!(greedy.text.key(), "z w v");
    assert_eq!(greedy.g, 1.0);
    let half = weighted_astar(&p, &mut l, 0.5, &root, Scope::Whole, 1.0, &Never).unwrap().goal.unwrap();
    assert_eq!(half.text.key(), "a y c");

    let result = tce_search(&p, &[], &mut EcLedger::new(2000), &Never).unwrap();
    assert_eq!(result.source, Source::Search);
    assert_eq!(result.counterfactual.as_deref(), Some("a y c"));
    assert!((result.distance.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(result.w_h_at_solution, Some(0.5));
    let kinds: Vec<_> = result.edit_trace.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EditKind::MaskInsert, EditKind::Remove]);
    let distances: Vec<f64> = result.history.iter().map(|i| i.distance).collect();
    assert_eq!(distances, vec![1.0, 1.0 / 3.0]);
    assert!(result.history.windows(2).all(|w| w[0].ec <= w[1].ec));
}

#[test]
fn zero_budget_returns_the_default() {
    let (w, c) = staged_world();
    let config = SearchConfig {
        budget: 0,
        ..SearchConfig::default()
    };
    let p = staged_problem(&w, &c, config);
    let pool = vec![w.text("z w v")];
    let r = explain(&p, &pool, &Never).unwrap();
    assert_eq!(r.source, Source::Default);
    assert_eq!(r.ec_used, 0);
    assert_eq!(r.counterfactual.as_deref(), Some("z w v"));
    assert_eq!(r.distance, Some(1.0));

    let r = explain(&p, &[], &Never).unwrap();
    assert_eq!(r.source, Source::None);
    assert!(r.counterfactual.is_none() && r.explanation().is_none());
}

#[test]
fn interrupted_search_keeps_the_default() {
    let (w, c) = staged_world();
    let p = staged_problem(&w, &c, SearchConfig::default());
    let flag = core::sync::atomic::AtomicBool::new(true);
    let r = explain(&p, &[w.text("z w v")], &flag).unwrap();
    assert_eq!(r.source, Source::Default);
}

#[test]
fn target_class_text_is_its_own_counterfactual() {
    let (w, c) = staged_world();
    let p = SearchProblem::new(w.text("a y c"), 1, &Levenshtein, w.models(&c), SearchConfig::default()).unwrap();
    let r = explain(&p, &[], &Never).unwrap();
    assert_eq!(r.counterfactual.as_deref(), Some("a y c"));
    assert_eq!(r.distance, Some(0.0));
    assert_eq!(r.ec_used, 0);
    assert_eq!(
        r.explanation().unwrap(),
        "If a y c had been changed to a y c, the classification would have changed from dst to dst"
    );
}

#[test]
fn budget_caps_expensive_calls() {
    let (w, c) = staged_world();
    for budget in [1, 2, 3, 5, 8] {
        let config = SearchConfig {
            budget,
            ..SearchConfig::default()
        };
        let p = staged_problem(&w, &c, config);
        let r = explain(&p, &[], &Never).unwrap();
        assert!(r.ec_used <= budget);
    }
}

#[test]
fn runs_are_deterministic() {
    let (w, c) = staged_world();
    let p = staged_problem(&w, &c, SearchConfig::default());
    assert_eq!(explain(&p, &[], &Never).unwrap(), explain(&p, &[], &Never).unwrap());
}

fn review_nb() -> NaiveBayes {
    let corpus = Corpus::from_pairs([
        ("the staff was friendly", "pos"),
        ("friendly people", "pos"),
        ("the staff was rude", "neg"),
        ("rude people", "neg"),
    ])
    .unwrap();
    train_naive_bayes(&corpus, NaiveBayesConfig::default()).unwrap()
}

#[test]
fn sentence_importance_follows_the_formula() {
    let w = World::new(TableSuggester::default(), "rude\tfriendly\n");
    let nb = review_nb();
    let t = w.text("The room was clean. The staff was rude. We left early.");
    assert_eq!(t.sentence_count(), 3);
    let pos = 0;
    let theta = sentence_importance(&nb, &t, 1, pos).unwrap();
    let want = nb.classify_proba(&t.without_sentence(1), pos).unwrap() - nb.classify_proba(&t, pos).unwrap();
    assert_eq!(theta, want);
    assert!(theta > 0.0);
    let ranked = rank_sentences(&nb, &t, pos).unwrap();
    assert_eq!(ranked[0].0, 1);
    assert!(sentence_importance(&nb, &w.text("Only one."), 0, pos).is_err());

    let flat = TableClassifier::new(&[], 0.3);
    assert_eq!(sentence_importance(&flat, &t, 0, 1).unwrap(), 0.0);
}

#[test]
fn focused_search_edits_the_important_sentence() {
    let w = World::new(TableSuggester::default(), "rude\tfriendly\n");
    let nb = review_nb();
    let x = w.text("The room was clean. The staff was rude. We left early.");
    let bounds = x.sentence_bounds[1];
    let p = SearchProblem::new(x, 0, &Levenshtein, w.models(&nb), SearchConfig::default()).unwrap();
    let r = explain(&p, &[], &Never).unwrap();
    assert_eq!(r.source, Source::Search);
    assert!(r.target_proba.unwrap() > 0.5);
    for e in &r.edit_trace {
        assert!(bounds.0 <= e.position && e.position < bounds.1, "{e:?} outside {bounds:?}");
    }
    assert_eq!(r.counterfactual.as_deref(), Some("The room was clean. The staff was friendly. We left early."));

    let unfocused = SearchConfig {
        sentence_threshold: usize::MAX,
        ..SearchConfig::default()
    };
    let p2 = SearchProblem::new(p.x.clone(), 0, &Levenshtein, w.models(&nb), unfocused).unwrap();
    let a = focused_search(&p2, &[], &mut EcLedger::new(2000), &Never).unwrap();
    let b = tce_search(&p2, &[], &mut EcLedger::new(2000), &Never).unwrap();
    assert_eq!(a, b);
}

#[test]
fn result_json_round_trip() {
    let (w, c) = staged_world();
    let p = staged_problem(&w, &c, SearchConfig::default());
    let r = explain(&p, &[], &Never).unwrap();
    let json = serde_json::to_string(&r).unwrap();
    let back: CounterfactualResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    assert_eq!(r.distance_at(0), None);
    assert_eq!(r.distance_at(u64::MAX), r.distance);
}

proptest! {
    #[test]
    fn heuristic_in_unit_interval(sigma in 0.0f64..=1.0, tau in 0.01f64..=1.0) {
        let h = heuristic(sigma, tau);
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert_eq!(h == 0.0, sigma >= tau);
    }

    #[test]
    fn nb_runs_respect_validity_and_budget(words in proptest::collection::vec(
        prop_oneof![Just("good"), Just("bad"), Just("movie"), Just("film"), Just("the")], 1..5),
        budget in 0u64..30,
    ) {
        let w = World::new(TableSuggester::default(), "good\tbad\nbad\tgood\n");
        let nb = sentiment_nb();
        let config = SearchConfig { budget, ..SearchConfig::default() };
        let p = SearchProblem::new(w.text(&words.join(" ")), 0, &Levenshtein, w.models(&nb), config).unwrap();
        let pool: Vec<_> = ["good movie", "bad film", "good film"].iter().map(|s| w.text(s)).collect();
        let r = explain(&p, &pool, &Never).unwrap();
        prop_assert!(r.ec_used <= budget);
        if let Some(cf) = &r.counterfactual {
            let t = w.text(cf);
            let mut l = EcLedger::unbounded();
            prop_assert!(is_goal(&p, &mut l, &t).unwrap());
        }
        if r.source == Source::Search {
            prop_assert!(r.plausibility_ratio.unwrap() <= 1.5);
        }
        prop_assert!(r.history.windows(2).all(|h| h[1].distance < h[0].distance));
    }
}
