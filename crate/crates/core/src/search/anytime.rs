use alloc::string::String;
use alloc::vec::Vec;

use super::astar::better_h;
use super::{
    default_counterfactual, weighted_astar, CounterfactualResult, Improvement, Interrupt, Scope, SearchError,
    SearchNode, SearchProblem, Source, StopReason,
};
use crate::models::{Classifier, EcLedger};
use crate::operators::Edit;
use crate::text::{clean_text, TokenizedText};

struct Best {
    text: String,
    distance: f64,
    sigma: f64,
    ratio: Option<f64>,
    source: Source,
    w_h: Option<f64>,
    edits: Vec<Edit>,
}

struct Run<'p, 'a> {
    problem: &'p SearchProblem<'a>,
    start_ec: u64,
    original_label: String,
    best: Option<Best>,
    history: Vec<Improvement>,
}

impl<'p, 'a> Run<'p, 'a> {
    fn start(problem: &'p SearchProblem<'a>, pool: &[TokenizedText], ledger: &mut EcLedger) -> Result<Self, SearchError> {
        let start_ec = ledger.ec();
        let predicted = ledger.predict(problem.models.classifier, &problem.x)?;
        let mut run = Self {
            problem,
            start_ec,
            original_label: problem.models.classifier.labels()[predicted].clone(),
            best: None,
            history: Vec::new(),
        };
        if let Some(d) = default_counterfactual(problem, pool, ledger)? {
            run.best = Some(Best {
                text: clean_text(&d.text.raw),
                distance: d.distance,
                sigma: d.target_proba,
                ratio: None,
                source: Source::Default,
                w_h: None,
                edits: Vec::new(),
            });
            run.history.push(Improvement {
                ec: ledger.ec() - start_ec,
                distance: d.distance,
            });
        }
        Ok(run)
    }

    fn offer(&mut self, node: &SearchNode, w_h: f64, ledger: &EcLedger) {
        if self.best.as_ref().is_none_or(|b| node.g < b.distance) {
            self.best = Some(Best {
                text: clean_text(&node.text.detokenized()),
                distance: node.g,
                sigma: node.sigma,
                ratio: Some(node.ratio),
                source: Source::Search,
                w_h: Some(w_h),
                edits: node.edits.clone(),
            });
            self.history.push(Improvement {
                ec: ledger.ec() - self.start_ec,
                distance: node.g,
            });
        }
    }

    fn finish(self, ledger: &EcLedger) -> CounterfactualResult {
        let problem = self.problem;
        let base = CounterfactualResult {
            original: clean_text(&problem.x.raw),
            counterfactual: None,
            source: Source::None,
            original_label: self.original_label,
            target_label: problem.target_label().into(),
            distance: None,
            target_proba: None,
            plausibility_ratio: None,
            ec_used: ledger.ec() - self.start_ec,
            w_h_at_solution: None,
            edit_trace: Vec::new(),
            history: self.history,
        };
        match self.best {
            None => base,
            Some(b) => CounterfactualResult {
                counterfactual: Some(b.text),
                source: b.source,
                distance: Some(b.distance),
                target_proba: Some(b.sigma),
                plausibility_ratio: b.ratio,
                w_h_at_solution: b.w_h,
                edit_trace: b.edits,
                ..base
            },
        }
    }
}

/// Shared preamble: the root node, the root-goal shortcut and the original's
/// loss. `None` means the run is already over.
fn prepare(
    run: &mut Run<'_, '_>,
    ledger: &mut EcLedger,
) -> Result<Option<(SearchNode, f64)>, SearchError> {
    let problem = run.problem;
    let (root, root_goal) = SearchNode::root(problem, ledger, problem.x.clone(), 1.0, Vec::new())?;
    if root_goal {
        run.offer(&root, 1.0, ledger);
        return Ok(None);
    }
    match ledger.lm_loss(problem.models.lm, &problem.x) {
        Ok(loss) => Ok(Some((root, loss))),
        Err(e) if e.is_budget_exhausted() => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// The anytime loop: start from the default counterfactual, then run
/// weighted A* with `w_h = 1, 1/2, 1/4, ...` until the budget runs out, an
/// interrupt arrives or `w_h` drops below the configured floor.
pub fn tce_search(
    problem: &SearchProblem<'_>,
    pool: &[TokenizedText],
    ledger: &mut EcLedger,
    interrupt: &dyn Interrupt,
) -> Result<CounterfactualResult, SearchError> {
    let mut run = Run::start(problem, pool, ledger)?;
    let Some((root, loss)) = prepare(&mut run, ledger)? else {
        return Ok(run.finish(ledger));
    };
    let mut w_h = 1.0;
    while !interrupt.interrupted() && w_h >= problem.config.min_weight {
        let it = weighted_astar(problem, ledger, w_h, &root, Scope::Whole, loss, interrupt)?;
        if let Some(goal) = &it.goal {
            run.offer(goal, w_h, ledger);
        }
        if matches!(it.stop, StopReason::Budget | StopReason::Interrupted) {
            break;
        }
        w_h /= 2.0;
    }
    Ok(run.finish(ledger))
}

/// `θ(s_i) = σ(t \ s_i, ŷ) - σ(t, ŷ)`.
pub fn sentence_importance(
    classifier: &dyn Classifier,
    text: &TokenizedText,
    sentence: usize,
    target: usize,
) -> Result<f64, SearchError> {
    if text.sentence_count() < 2 {
        return Err(SearchError::Argument("sentence importance needs at least two sentences".into()));
    }
    if sentence >= text.sentence_count() {
        return Err(SearchError::Argument(alloc::format!(
            "sentence {sentence} out of range for {} sentences",
            text.sentence_count()
        )));
    }
    let without = text.without_sentence(sentence);
    Ok(classifier.classify_proba(&without, target)? - classifier.classify_proba(text, target)?)
}

/// Sentence indices by descending importance; ties keep text order.
pub(crate) fn rank_sentences(
    classifier: &dyn Classifier,
    text: &TokenizedText,
    target: usize,
) -> Result<Vec<(usize, f64)>, SearchError> {
    let mut ranked = (0..text.sentence_count())
        .map(|s| sentence_importance(classifier, text, s, target).map(|t| (s, t)))
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Search for long texts: each top-level iteration walks the sentences by
/// importance and searches edits inside one sentence at a time, evaluating
/// everything on the full text. The lowest-h modification of a sentence is
/// kept before moving on to the next one. Texts with at most
/// `sentence_threshold` sentences go to [`tce_search`].
pub fn focused_search(
    problem: &SearchProblem<'_>,
    pool: &[TokenizedText],
    ledger: &mut EcLedger,
    interrupt: &dyn Interrupt,
) -> Result<CounterfactualResult, SearchError> {
    if problem.x.sentence_count() <= problem.config.sentence_threshold.max(1) {
        return tce_search(problem, pool, ledger, interrupt);
    }
    let mut run = Run::start(problem, pool, ledger)?;
    let Some((root, loss)) = prepare(&mut run, ledger)? else {
        return Ok(run.finish(ledger));
    };
    let ranking = rank_sentences(problem.models.classifier, &problem.x, problem.target)?;
    let mut w_h = 1.0;
    'outer: while !interrupt.interrupted() && w_h >= problem.config.min_weight {
        let mut working = root.clone();
        for &(s, _) in &ranking {
            let it = weighted_astar(problem, ledger, w_h, &working, Scope::Sentence(s), loss, interrupt)?;
            if let Some(goal) = &it.goal {
                run.offer(goal, w_h, ledger);
                break;
            }
            if matches!(it.stop, StopReason::Budget | StopReason::Interrupted) {
                break 'outer;
            }
            if better_h(&it.best_h, &working) {
                working = it.best_h;
            }
        }
        w_h /= 2.0;
    }
    Ok(run.finish(ledger))
}

/// Runs [`focused_search`] on a fresh ledger holding the configured budget.
pub fn explain(
    problem: &SearchProblem<'_>,
    pool: &[TokenizedText],
    interrupt: &dyn Interrupt,
) -> Result<CounterfactualResult, SearchError> {
    let mut ledger = EcLedger::new(problem.config.budget);
    focused_search(problem, pool, &mut ledger, interrupt)
}
