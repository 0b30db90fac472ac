use alloc::collections::{BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{goal_test, heuristic, Interrupt, SearchError, SearchProblem};
use crate::models::EcLedger;
use crate::operators::{expand, plausibility_filter, Edit};
use crate::text::TokenizedText;

/// Which tokens the operators may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Whole,
    Sentence(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub text: TokenizedText,
    pub g: f64,
    pub h: f64,
    pub f: f64,
    /// Target-class confidence.
    pub sigma: f64,
    /// Loss ratio against the original.
    pub ratio: f64,
    /// Edits from the original, in order.
    pub edits: Vec<Edit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Goal,
    OpenExhausted,
    NodeCap,
    Budget,
    Interrupted,
}

#[derive(Debug, Clone)]
pub struct AstarRun {
    pub goal: Option<SearchNode>,
    /// Lowest-h node generated, the root included.
    pub best_h: SearchNode,
    pub stop: StopReason,
    pub expanded: usize,
}

struct Entry {
    f: f64,
    g: f64,
    seq: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.g.total_cmp(&self.g))
            .then(other.seq.cmp(&self.seq))
    }
}

fn f_score(w_h: f64, g: f64, h: f64) -> f64 {
    (1.0 - w_h) * g + w_h * h
}

pub(crate) fn better_h(a: &SearchNode, b: &SearchNode) -> bool {
    a.h < b.h || (a.h == b.h && a.g < b.g)
}

impl SearchNode {
    /// Scores `text` as a search root.
    pub fn root(
        problem: &SearchProblem<'_>,
        ledger: &mut EcLedger,
        text: TokenizedText,
        ratio: f64,
        edits: Vec<Edit>,
    ) -> Result<(Self, bool), SearchError> {
        let g = problem.cost(&text)?;
        let (goal, sigma) = goal_test(problem.models.classifier, ledger, &text, problem.target, problem.config.tau)?;
        let h = heuristic(sigma, problem.config.tau);
        Ok((
            Self {
                text,
                g,
                h,
                f: h,
                sigma,
                ratio,
                edits,
            },
            goal,
        ))
    }
}

/// One best-first iteration with heuristic weight `w_h`, starting at `root`.
///
/// Nodes are popped by lowest `f`, then lowest `g`, then insertion order.
/// Children are goal-tested as they are generated; when an expansion yields
/// goals, the closest of them ends the iteration. Running out of budget ends
/// it too, and the partially filtered children of that expansion are
/// dropped. Scorer failures other than budget exhaustion are errors.
pub fn weighted_astar(
    problem: &SearchProblem<'_>,
    ledger: &mut EcLedger,
    w_h: f64,
    root: &SearchNode,
    scope: Scope,
    original_loss: f64,
    interrupt: &dyn Interrupt,
) -> Result<AstarRun, SearchError> {
    let tau = problem.config.tau;
    let ctx = problem.operator_context();
    let mut root = root.clone();
    root.f = f_score(w_h, root.g, root.h);
    let mut best_h = root.clone();
    if root.sigma > tau && goal_test(problem.models.classifier, ledger, &root.text, problem.target, tau)?.0 {
        return Ok(AstarRun {
            goal: Some(root),
            best_h,
            stop: StopReason::Goal,
            expanded: 0,
        });
    }

    let mut nodes = Vec::new();
    let mut open = BinaryHeap::new();
    let mut seen = BTreeSet::new();
    seen.insert(root.text.key());
    open.push(Entry {
        f: root.f,
        g: root.g,
        seq: 0,
    });
    nodes.push(root);
    let mut expanded = 0usize;

    let stop = loop {
        if interrupt.interrupted() {
            break StopReason::Interrupted;
        }
        if problem.config.iteration_node_cap.is_some_and(|cap| expanded >= cap) {
            break StopReason::NodeCap;
        }
        let Some(entry) = open.pop() else {
            break StopReason::OpenExhausted;
        };
        let parent = nodes[entry.seq].clone();
        expanded += 1;

        let span = match scope {
            Scope::Whole => None,
            Scope::Sentence(s) => parent.text.sentence_bounds.get(s).copied(),
        };
        let candidates = match expand(&parent.text, &ctx, ledger, span) {
            Ok(c) => c,
            Err(e) if e.is_budget_exhausted() => break StopReason::Budget,
            Err(e) => return Err(e.into()),
        };
        let fresh: Vec<_> = candidates.into_iter().filter(|c| seen.insert(c.text.key())).collect();
        let filtered = plausibility_filter(fresh, original_loss, problem.models.lm, problem.config.gamma, ledger);
        match filtered.error {
            Some(e) if e.is_budget_exhausted() => break StopReason::Budget,
            Some(e) => return Err(e.into()),
            None => {}
        }

        let mut goal: Option<SearchNode> = None;
        for (candidate, ratio) in filtered.kept {
            let g = problem.cost(&candidate.text)?;
            let (is_goal, sigma) = goal_test(problem.models.classifier, ledger, &candidate.text, problem.target, tau)?;
            let h = heuristic(sigma, tau);
            let mut edits = parent.edits.clone();
            edits.push(candidate.edit);
            let child = SearchNode {
                text: candidate.text,
                g,
                h,
                f: f_score(w_h, g, h),
                sigma,
                ratio,
                edits,
            };
            if better_h(&child, &best_h) {
                best_h = child.clone();
            }
            if is_goal {
                if goal.as_ref().is_none_or(|b| child.g < b.g) {
                    goal = Some(child);
                }
                continue;
            }
            open.push(Entry {
                f: child.f,
                g: child.g,
                seq: nodes.len(),
            });
            nodes.push(child);
        }
        if let Some(goal) = goal {
            return Ok(AstarRun {
                goal: Some(goal),
                best_h,
                stop: StopReason::Goal,
                expanded,
            });
        }
    };
    Ok(AstarRun {
        goal: None,
        best_h,
        stop,
        expanded,
    })
}
