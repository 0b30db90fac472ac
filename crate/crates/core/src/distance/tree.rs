use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{DistanceError, DistanceFn};
use crate::text::{PosTag, TokenizedText};

/// An ordered labeled tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    pub label: String,
    pub children: Vec<LabeledTree>,
}

impl LabeledTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<LabeledTree>) -> Self {
        Self {
            label: label.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::size).sum::<usize>()
    }
}

/// Turns one sentence into a tree.
pub trait TreeParser: Sync {
    fn parse(&self, tokens: &[String], tags: &[PosTag]) -> LabeledTree;
}

/// `S -> POS -> word`, one POS node per token.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShallowParser;

impl TreeParser for ShallowParser {
    fn parse(&self, tokens: &[String], tags: &[PosTag]) -> LabeledTree {
        build_shallow_tree(tokens, tags)
    }
}

pub fn build_shallow_tree(tokens: &[String], tags: &[PosTag]) -> LabeledTree {
    LabeledTree::node(
        "S",
        tokens
            .iter()
            .zip(tags)
            .map(|(w, t)| LabeledTree::node(t.as_str(), vec![LabeledTree::leaf(w.to_lowercase())]))
            .collect(),
    )
}

/// Post-order view used by the dynamic program: labels, leftmost leaf
/// descendant of every node, and the keyroots.
struct PostOrder<'a> {
    labels: Vec<&'a str>,
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> PostOrder<'a> {
    fn new(tree: &'a LabeledTree) -> Self {
        let mut labels = Vec::new();
        let mut leftmost = Vec::new();
        fn walk<'a>(t: &'a LabeledTree, labels: &mut Vec<&'a str>, leftmost: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &t.children {
                let l = walk(c, labels, leftmost);
                first.get_or_insert(l);
            }
            let idx = labels.len();
            labels.push(&t.label);
            let l = first.unwrap_or(idx);
            leftmost.push(l);
            l
        }
        walk(tree, &mut labels, &mut leftmost);
        let n = labels.len();
        // a keyroot is the highest node sharing its leftmost leaf
        let mut keyroots: Vec<usize> = (0..n)
            .filter(|&i| !(i + 1..n).any(|j| leftmost[j] == leftmost[i]))
            .collect();
        keyroots.sort_unstable();
        Self {
            labels,
            leftmost,
            keyroots,
        }
    }
}

/// Unit-cost tree edit distance (Zhang–Shasha keyroot algorithm).
pub fn zhang_shasha(a: &LabeledTree, b: &LabeledTree) -> usize {
    let pa = PostOrder::new(a);
    let pb = PostOrder::new(b);
    let (n, m) = (pa.labels.len(), pb.labels.len());
    let mut treedist = vec![vec![0usize; m]; n];
    let mut forest = vec![vec![0usize; m + 1]; n + 1];
    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let (li, lj) = (pa.leftmost[i], pb.leftmost[j]);
            // forest[x][y]: distance between a[li..li+x) and b[lj..lj+y)
            forest[0][0] = 0;
            for x in 1..=i - li + 1 {
                forest[x][0] = forest[x - 1][0] + 1;
            }
            for y in 1..=j - lj + 1 {
                forest[0][y] = forest[0][y - 1] + 1;
            }
            for x in 1..=i - li + 1 {
                for y in 1..=j - lj + 1 {
                    let (u, v) = (li + x - 1, lj + y - 1);
                    let delete = forest[x - 1][y] + 1;
                    let insert = forest[x][y - 1] + 1;
                    if pa.leftmost[u] == li && pb.leftmost[v] == lj {
                        let relabel = forest[x - 1][y - 1] + usize::from(pa.labels[u] != pb.labels[v]);
                        forest[x][y] = delete.min(insert).min(relabel);
                        treedist[u][v] = forest[x][y];
                    } else {
                        let (px, py) = (pa.leftmost[u] - li, pb.leftmost[v] - lj);
                        forest[x][y] = delete.min(insert).min(forest[px][py] + treedist[u][v]);
                    }
                }
            }
        }
    }
    treedist[n - 1][m - 1]
}

/// Sum of per-sentence tree distances divided by `|x|`. Sentences pair by
/// index; an unpaired sentence costs its whole tree.
pub struct TreeDistance<P> {
    pub parser: P,
}

impl<P: TreeParser> TreeDistance<P> {
    pub fn new(parser: P) -> Self {
        Self { parser }
    }

    fn trees(&self, t: &TokenizedText) -> Vec<LabeledTree> {
        (0..t.sentence_count())
            .map(|s| self.parser.parse(t.sentence_tokens(s), t.sentence_tags(s)))
            .collect()
    }
}

impl<P: TreeParser> DistanceFn for TreeDistance<P> {
    fn name(&self) -> &str {
        "tree"
    }

    fn dist(&self, x: &TokenizedText, candidate: &TokenizedText) -> Result<f64, DistanceError> {
        if x.is_empty() {
            return Err(DistanceError::EmptyOriginal);
        }
        let (ta, tb) = (self.trees(x), self.trees(candidate));
        let mut total = 0usize;
        for i in 0..ta.len().max(tb.len()) {
            total += match (ta.get(i), tb.get(i)) {
                (Some(a), Some(b)) => zhang_shasha(a, b),
                (Some(a), None) => a.size(),
                (None, Some(b)) => b.size(),
                (None, None) => 0,
            };
        }
        Ok(total as f64 / x.len() as f64)
    }
}

impl core::fmt::Display for LabeledTree {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.label)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}
