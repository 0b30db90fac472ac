//! Candidate generators and the plausibility filter.
//!
//! Each operator proposes texts one word-level edit away from its input:
//! mask-fill replacement and insertion, word removal, swaps with the target
//! class's differentiating words, and antonym swaps. Punctuation is never
//! replaced or removed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::banks::{PosSelection, WordBanks};
use crate::models::{EcLedger, FillMode, MaskFillSuggester, ModelError, PlausibilityScorer, ScoredSuggestion};
use crate::text::{PosTagger, TokenizedText};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    MaskReplace,
    MaskInsert,
    Remove,
    DwbSwap,
    AntonymSwap,
}

impl EditKind {
    pub const ALL: [EditKind; 5] = [
        EditKind::MaskReplace,
        EditKind::MaskInsert,
        EditKind::Remove,
        EditKind::DwbSwap,
        EditKind::AntonymSwap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EditKind::MaskReplace => "mask_replace",
            EditKind::MaskInsert => "mask_insert",
            EditKind::Remove => "remove",
            EditKind::DwbSwap => "dwb_swap",
            EditKind::AntonymSwap => "antonym_swap",
        }
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One word-level edit. `position` indexes the parent's tokens; for an
/// insertion it is the index the new word takes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub kind: EditKind,
    pub position: usize,
    pub new_word: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub text: TokenizedText,
    pub edit: Edit,
}

/// The operators a search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSet {
    pub mask_replace: bool,
    pub mask_insert: bool,
    pub remove: bool,
    pub dwb_swap: bool,
    pub antonym_swap: bool,
}

impl Default for OperatorSet {
    fn default() -> Self {
        Self::full()
    }
}

impl OperatorSet {
    pub fn full() -> Self {
        Self {
            mask_replace: true,
            mask_insert: true,
            remove: true,
            dwb_swap: true,
            antonym_swap: true,
        }
    }

    pub fn none() -> Self {
        Self {
            mask_replace: false,
            mask_insert: false,
            remove: false,
            dwb_swap: false,
            antonym_swap: false,
        }
    }

    pub fn no_dwb() -> Self {
        Self {
            dwb_swap: false,
            ..Self::full()
        }
    }

    pub fn no_antonyms() -> Self {
        Self {
            antonym_swap: false,
            ..Self::full()
        }
    }

    pub fn contains(&self, kind: EditKind) -> bool {
        match kind {
            EditKind::MaskReplace => self.mask_replace,
            EditKind::MaskInsert => self.mask_insert,
            EditKind::Remove => self.remove,
            EditKind::DwbSwap => self.dwb_swap,
            EditKind::AntonymSwap => self.antonym_swap,
        }
    }

    pub fn set(&mut self, kind: EditKind, on: bool) {
        match kind {
            EditKind::MaskReplace => self.mask_replace = on,
            EditKind::MaskInsert => self.mask_insert = on,
            EditKind::Remove => self.remove = on,
            EditKind::DwbSwap => self.dwb_swap = on,
            EditKind::AntonymSwap => self.antonym_swap = on,
        }
    }
}

impl fmt::Display for OperatorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::full() {
            return f.write_str("full");
        }
        if *self == Self::no_dwb() {
            return f.write_str("no-dwb");
        }
        if *self == Self::no_antonyms() {
            return f.write_str("no-antonyms");
        }
        let names: Vec<&str> = EditKind::ALL
            .iter()
            .filter(|k| self.contains(**k))
            .map(|k| k.as_str())
            .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown operator `{0}`")]
pub struct UnknownOperator(pub String);

impl FromStr for OperatorSet {
    type Err = UnknownOperator;

    /// `full`, `no-dwb`, `no-antonyms`, or a comma-separated list of
    /// operator names (`mask_replace,remove,...`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "full" => return Ok(Self::full()),
            "no-dwb" | "no_dwb" => return Ok(Self::no_dwb()),
            "no-antonyms" | "no_antonyms" => return Ok(Self::no_antonyms()),
            _ => {}
        }
        let mut set = Self::none();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let kind = match name.replace('-', "_").as_str() {
                "mask_replace" | "replace" => EditKind::MaskReplace,
                "mask_insert" | "insert" => EditKind::MaskInsert,
                "remove" | "removal" => EditKind::Remove,
                "dwb" | "dwb_swap" => EditKind::DwbSwap,
                "antonym" | "antonyms" | "antonym_swap" => EditKind::AntonymSwap,
                _ => return Err(UnknownOperator(name.to_string())),
            };
            set.set(kind, true);
        }
        Ok(set)
    }
}

/// Word to antonyms, keyed by lowercase word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntonymLexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("antonym lexicon line {line}: {message}")]
pub struct AntonymError {
    pub line: usize,
    pub message: String,
}

impl AntonymLexicon {
    /// Parses `word<TAB>antonym1,antonym2,...` lines; `#` starts a comment
    /// line. Self-antonyms are dropped.
    pub fn parse(source: &str) -> Result<Self, AntonymError> {
        let mut lexicon = Self::default();
        for (idx, line) in source.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, antonyms) = line.split_once('\t').ok_or_else(|| AntonymError {
                line: idx + 1,
                message: "expected `word<TAB>antonyms`".into(),
            })?;
            let word = word.trim();
            if word.is_empty() {
                return Err(AntonymError {
                    line: idx + 1,
                    message: "empty word".into(),
                });
            }
            for a in antonyms.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                lexicon.insert(word, a);
            }
        }
        Ok(lexicon)
    }

    pub fn insert(&mut self, word: &str, antonym: &str) {
        let (w, a) = (word.to_lowercase(), antonym.to_lowercase());
        if w != a {
            self.entries.entry(w).or_default().insert(a);
        }
    }

    pub fn antonyms(&self, word: &str) -> impl Iterator<Item = &str> + '_ {
        self.entries
            .get(&word.to_lowercase())
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.entries.iter().map(|(w, a)| (w.as_str(), a))
    }
}

/// Keeps the suggestions scoring at least `alpha` times the best score, in
/// their original order.
pub fn alpha_filter(suggestions: &[ScoredSuggestion], alpha: f64) -> Vec<ScoredSuggestion> {
    let Some(max) = suggestions.iter().map(|s| s.score).reduce(f64::max) else {
        return Vec::new();
    };
    let threshold = alpha * max;
    suggestions.iter().filter(|s| s.score >= threshold).cloned().collect()
}

/// Token range edits may touch: `Some((start, end))` restricts to one
/// sentence, `None` allows the whole text.
pub type Span = Option<(usize, usize)>;

fn in_span(span: Span, i: usize) -> bool {
    span.is_none_or(|(a, b)| a <= i && i < b)
}

fn same_word(a: &str, b: &str) -> bool {
    a.to_lowercase() == b.to_lowercase()
}

fn usable_suggestion(word: &str) -> bool {
    !word.is_empty() && !word.chars().any(char::is_whitespace)
}

/// Everything the operators read besides the text.
#[derive(Clone, Copy)]
pub struct OperatorContext<'a> {
    pub target: &'a str,
    pub suggester: &'a dyn MaskFillSuggester,
    pub banks: &'a WordBanks,
    pub selection: &'a PosSelection,
    pub antonyms: &'a AntonymLexicon,
    pub tagger: &'a dyn PosTagger,
    pub alpha: f64,
    pub top_n: usize,
    pub operators: OperatorSet,
}

pub fn op_mask_replace(
    text: &TokenizedText,
    ctx: &OperatorContext<'_>,
    ledger: &mut EcLedger,
    span: Span,
) -> Result<Vec<Candidate>, ModelError> {
    let mut out = Vec::new();
    for i in 0..text.len() {
        if !text.is_word(i) || !in_span(span, i) {
            continue;
        }
        let suggestions = ledger.mask_fill(ctx.suggester, &text.tokens, i, FillMode::Replace, ctx.target, ctx.top_n)?;
        for s in alpha_filter(&suggestions, ctx.alpha) {
            if !usable_suggestion(&s.word) || same_word(&s.word, &text.tokens[i]) {
                continue;
            }
            out.push(Candidate {
                text: text.with_replacement(i, &s.word, ctx.tagger.tag(&s.word)),
                edit: Edit {
                    kind: EditKind::MaskReplace,
                    position: i,
                    new_word: Some(s.word),
                },
            });
        }
    }
    Ok(out)
}

/// Insertions into every gap between two consecutive tokens.
pub fn op_mask_insert(
    text: &TokenizedText,
    ctx: &OperatorContext<'_>,
    ledger: &mut EcLedger,
    span: Span,
) -> Result<Vec<Candidate>, ModelError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for i in 1..text.len() {
        if let Some((a, b)) = span {
            if i <= a || i >= b {
                continue;
            }
        }
        let suggestions = ledger.mask_fill(ctx.suggester, &text.tokens, i, FillMode::Insert, ctx.target, ctx.top_n)?;
        for s in alpha_filter(&suggestions, ctx.alpha) {
            if !usable_suggestion(&s.word) {
                continue;
            }
            let candidate = text.with_insertion(i, &s.word, ctx.tagger.tag(&s.word));
            if seen.insert(candidate.key()) {
                out.push(Candidate {
                    text: candidate,
                    edit: Edit {
                        kind: EditKind::MaskInsert,
                        position: i,
                        new_word: Some(s.word),
                    },
                });
            }
        }
    }
    Ok(out)
}

/// One removal per word token. Inside a span, a removal that would empty the
/// sentence is skipped.
pub fn op_word_removal(text: &TokenizedText, span: Span) -> Vec<Candidate> {
    if text.len() < 2 {
        return Vec::new();
    }
    (0..text.len())
        .filter(|&i| text.is_word(i) && in_span(span, i))
        .filter(|_| span.is_none_or(|(a, b)| b - a >= 2))
        .map(|i| Candidate {
            text: text.with_removal(i),
            edit: Edit {
                kind: EditKind::Remove,
                position: i,
                new_word: None,
            },
        })
        .collect()
}

pub fn op_dwb_swap(text: &TokenizedText, ctx: &OperatorContext<'_>, span: Span) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (i, (token, tag)) in text.tokens.iter().zip(&text.pos_tags).enumerate() {
        if !text.is_word(i) || !in_span(span, i) || !ctx.selection.contains(*tag) {
            continue;
        }
        let Some(bank) = ctx.banks.get(ctx.target, *tag) else {
            continue;
        };
        for entry in &bank.entries {
            if same_word(&entry.word, token) {
                continue;
            }
            out.push(Candidate {
                text: text.with_replacement(i, &entry.word, bank.pos),
                edit: Edit {
                    kind: EditKind::DwbSwap,
                    position: i,
                    new_word: Some(entry.word.clone()),
                },
            });
        }
    }
    out
}

pub fn op_antonym_swap(
    text: &TokenizedText,
    lexicon: &AntonymLexicon,
    tagger: &dyn PosTagger,
    span: Span,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (i, token) in text.tokens.iter().enumerate() {
        if !text.is_word(i) || !in_span(span, i) {
            continue;
        }
        for antonym in lexicon.antonyms(token) {
            out.push(Candidate {
                text: text.with_replacement(i, antonym, tagger.tag(antonym)),
                edit: Edit {
                    kind: EditKind::AntonymSwap,
                    position: i,
                    new_word: Some(antonym.to_string()),
                },
            });
        }
    }
    out
}

/// Union of the enabled operators, in operator order, deduplicated on the
/// token sequence (the first proposer of a text wins).
pub fn expand(
    text: &TokenizedText,
    ctx: &OperatorContext<'_>,
    ledger: &mut EcLedger,
    span: Span,
) -> Result<Vec<Candidate>, ModelError> {
    let ops = ctx.operators;
    let mut all = Vec::new();
    if ops.mask_replace {
        all.extend(op_mask_replace(text, ctx, ledger, span)?);
    }
    if ops.mask_insert {
        all.extend(op_mask_insert(text, ctx, ledger, span)?);
    }
    if ops.remove {
        all.extend(op_word_removal(text, span));
    }
    if ops.dwb_swap {
        all.extend(op_dwb_swap(text, ctx, span));
    }
    if ops.antonym_swap {
        all.extend(op_antonym_swap(text, ctx.antonyms, ctx.tagger, span));
    }
    let mut seen = BTreeSet::new();
    seen.insert(text.key());
    all.retain(|c| seen.insert(c.text.key()));
    Ok(all)
}

/// Candidates whose loss ratio against the original passed, each with its
/// ratio, plus the error that cut filtering short, if any.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub kept: Vec<(Candidate, f64)>,
    pub error: Option<ModelError>,
}

/// Keeps candidates with `lm_loss(candidate) / original_loss <= gamma`. Every
/// loss goes through the ledger; on the first failure the candidates kept so
/// far are returned along with the error.
pub fn plausibility_filter(
    candidates: Vec<Candidate>,
    original_loss: f64,
    scorer: &dyn PlausibilityScorer,
    gamma: f64,
    ledger: &mut EcLedger,
) -> Filtered {
    if !(original_loss > 0.0) {
        return Filtered {
            kept: Vec::new(),
            error: Some(ModelError::InvalidRequest(format!(
                "original loss must be positive, got {original_loss}"
            ))),
        };
    }
    let mut kept = Vec::new();
    for c in candidates {
        match ledger.lm_loss(scorer, &c.text) {
            Ok(loss) => {
                let ratio = loss / original_loss;
                if ratio <= gamma {
                    kept.push((c, ratio));
                }
            }
            Err(e) => return Filtered { kept, error: Some(e) },
        }
    }
    Filtered { kept, error: None }
}
