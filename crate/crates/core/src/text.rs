//! Tokenization, sentence splitting, POS tagging and text cleaning.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Universal part-of-speech tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Pronoun,
    Determiner,
    Adposition,
    Conjunction,
    Numeral,
    Particle,
    Punctuation,
    Other,
}

impl PosTag {
    pub const ALL: [PosTag; 12] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adjective,
        PosTag::Adverb,
        PosTag::Pronoun,
        PosTag::Determiner,
        PosTag::Adposition,
        PosTag::Conjunction,
        PosTag::Numeral,
        PosTag::Particle,
        PosTag::Punctuation,
        PosTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "noun",
            PosTag::Verb => "verb",
            PosTag::Adjective => "adjective",
            PosTag::Adverb => "adverb",
            PosTag::Pronoun => "pronoun",
            PosTag::Determiner => "determiner",
            PosTag::Adposition => "adposition",
            PosTag::Conjunction => "conjunction",
            PosTag::Numeral => "numeral",
            PosTag::Particle => "particle",
            PosTag::Punctuation => "punctuation",
            PosTag::Other => "other",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown POS tag `{0}`")]
pub struct UnknownTag(pub String);

impl FromStr for PosTag {
    type Err = UnknownTag;

    /// Accepts the long names used here as well as the short universal
    /// tags (`NOUN`, `ADJ`, `PUNCT`, ...), case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tag = match s.trim().to_ascii_lowercase().as_str() {
            "noun" | "propn" | "n" => PosTag::Noun,
            "verb" | "aux" | "v" => PosTag::Verb,
            "adjective" | "adj" | "a" => PosTag::Adjective,
            "adverb" | "adv" | "r" => PosTag::Adverb,
            "pronoun" | "pron" => PosTag::Pronoun,
            "determiner" | "det" => PosTag::Determiner,
            "adposition" | "adp" => PosTag::Adposition,
            "conjunction" | "conj" | "cconj" | "sconj" => PosTag::Conjunction,
            "numeral" | "num" => PosTag::Numeral,
            "particle" | "prt" | "part" => PosTag::Particle,
            "punctuation" | "punct" | "." => PosTag::Punctuation,
            "other" | "x" | "intj" | "sym" => PosTag::Other,
            _ => return Err(UnknownTag(s.to_string())),
        };
        Ok(tag)
    }
}

/// Assigns a POS tag to a single token.
pub trait PosTagger: Sync {
    fn tag(&self, token: &str) -> PosTag;

    fn tag_all(&self, tokens: &[String]) -> Vec<PosTag> {
        tokens.iter().map(|t| self.tag(t)).collect()
    }
}

impl<T: PosTagger + ?Sized> PosTagger for &T {
    fn tag(&self, token: &str) -> PosTag {
        (**self).tag(token)
    }
}

/// Word-to-tag lookup table. Tokens without letters or digits are
/// punctuation, all-digit tokens are numerals, anything else missing from the
/// table is `other`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosLexicon {
    entries: BTreeMap<String, PosTag>,
}

const BUILTIN_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("lexicon line {line}: {message}")]
pub struct LexiconError {
    pub line: usize,
    pub message: String,
}

impl PosLexicon {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("builtin lexicon is well formed")
    }

    /// Parses `word<TAB>tag` lines. Blank lines and `#` comments are skipped.
    /// The first entry for a word wins.
    pub fn parse(source: &str) -> Result<Self, LexiconError> {
        let mut entries = BTreeMap::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line.split_once('\t').ok_or_else(|| LexiconError {
                line: idx + 1,
                message: "expected `word<TAB>tag`".to_string(),
            })?;
            let tag: PosTag = tag.parse().map_err(|e: UnknownTag| LexiconError {
                line: idx + 1,
                message: e.to_string(),
            })?;
            entries.entry(word.trim().to_lowercase()).or_insert(tag);
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, word: &str, tag: PosTag) {
        self.entries.insert(word.to_lowercase(), tag);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self, tag: PosTag) -> impl Iterator<Item = &str> + '_ {
        self.entries
            .iter()
            .filter(move |(_, t)| **t == tag)
            .map(|(w, _)| w.as_str())
    }
}

impl PosTagger for PosLexicon {
    fn tag(&self, token: &str) -> PosTag {
        if is_punctuation_token(token) {
            return PosTag::Punctuation;
        }
        if let Some(tag) = self.entries.get(token) {
            return *tag;
        }
        let lower = token.to_lowercase();
        if let Some(tag) = self.entries.get(&lower) {
            return *tag;
        }
        if token.chars().all(|c| c.is_ascii_digit()) {
            return PosTag::Numeral;
        }
        PosTag::Other
    }
}

/// Tags a token sequence with the given tagger.
pub fn pos_tag(tokens: &[String], tagger: &dyn PosTagger) -> Vec<PosTag> {
    tagger.tag_all(tokens)
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// A token carries no letters or digits.
pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_alphanumeric)
}

fn is_sentence_final(token: &str) -> bool {
    matches!(token, "." | "!" | "?")
}

/// Marks that attach to the preceding word when cleaning.
fn is_closing_punctuation(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | '!' | '?' | ';' | ':' | ')' | ']' | '}' | '%' | '…'
    )
}

struct Segmented {
    tokens: Vec<String>,
    spaces: Vec<bool>,
    sentence_bounds: Vec<(usize, usize)>,
}

fn segment(text: &str) -> Segmented {
    let mut tokens: Vec<String> = Vec::new();
    let mut spaces = Vec::new();
    let mut bounds = Vec::new();
    let mut sentence_start = 0;
    let mut chars = text.chars().peekable();
    let mut saw_space = false;
    while let Some(c) = chars.next() {
        if c.is_whitespace() {
            saw_space = true;
            continue;
        }
        let mut token = String::new();
        token.push(c);
        if is_word_char(c) {
            while let Some(&n) = chars.peek() {
                if !is_word_char(n) {
                    break;
                }
                token.push(n);
                chars.next();
            }
        }
        spaces.push(saw_space && !tokens.is_empty());
        saw_space = false;
        let ends_sentence =
            is_sentence_final(&token) && chars.peek().is_none_or(|n| n.is_whitespace());
        tokens.push(token);
        if ends_sentence {
            bounds.push((sentence_start, tokens.len()));
            sentence_start = tokens.len();
        }
    }
    if sentence_start < tokens.len() {
        bounds.push((sentence_start, tokens.len()));
    }
    Segmented {
        tokens,
        spaces,
        sentence_bounds: bounds,
    }
}

/// Splits text into word and punctuation tokens without tagging.
pub fn split_tokens(text: &str) -> Vec<String> {
    segment(text).tokens
}

/// Removes `#` and `@`, collapses whitespace, strips the ends and drops
/// spaces in front of closing punctuation.
pub fn clean_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c == '#' || c == '@' {
            continue;
        }
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space && !is_closing_punctuation(c) {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

/// A text with its token, sentence and POS structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub raw: String,
    pub tokens: Vec<String>,
    /// Half-open token ranges, one per sentence, covering every token once.
    pub sentence_bounds: Vec<(usize, usize)>,
    pub pos_tags: Vec<PosTag>,
    /// Whether whitespace precedes each token in the surface form.
    pub spaces: Vec<bool>,
}

/// Tokenizes and tags `text`.
pub fn tokenize(text: &str, tagger: &dyn PosTagger) -> TokenizedText {
    let seg = segment(text);
    let pos_tags = tagger.tag_all(&seg.tokens);
    TokenizedText {
        raw: text.to_string(),
        tokens: seg.tokens,
        sentence_bounds: seg.sentence_bounds,
        pos_tags,
        spaces: seg.spaces,
    }
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentence_bounds.len()
    }

    /// Cache and dedup key: the tokens joined by single spaces.
    pub fn key(&self) -> String {
        self.tokens.join(" ")
    }

    /// Surface form rebuilt from the tokens and their spacing.
    pub fn detokenized(&self) -> String {
        let mut out = String::new();
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 && self.spaces[i] {
                out.push(' ');
            }
            out.push_str(token);
        }
        out
    }

    /// Retokenizes the cleaned surface form.
    pub fn cleaned(&self, tagger: &dyn PosTagger) -> TokenizedText {
        tokenize(&clean_text(&self.detokenized()), tagger)
    }

    pub fn is_word(&self, i: usize) -> bool {
        self.pos_tags[i] != PosTag::Punctuation
    }

    /// Index of the sentence holding token `i`.
    pub fn sentence_of(&self, i: usize) -> Option<usize> {
        self.sentence_bounds
            .iter()
            .position(|&(s, e)| s <= i && i < e)
    }

    pub fn sentence_tokens(&self, s: usize) -> &[String] {
        let (a, b) = self.sentence_bounds[s];
        &self.tokens[a..b]
    }

    pub fn sentence_tags(&self, s: usize) -> &[PosTag] {
        let (a, b) = self.sentence_bounds[s];
        &self.pos_tags[a..b]
    }

    fn refresh_raw(&mut self) {
        self.raw = self.detokenized();
    }

    /// Replaces the token at `i`.
    pub fn with_replacement(&self, i: usize, word: &str, tag: PosTag) -> TokenizedText {
        let mut out = self.clone();
        out.tokens[i] = word.to_string();
        out.pos_tags[i] = tag;
        out.refresh_raw();
        out
    }

    /// Inserts a word before token `i`; it joins the sentence of token `i - 1`.
    pub fn with_insertion(&self, i: usize, word: &str, tag: PosTag) -> TokenizedText {
        let mut out = self.clone();
        out.tokens.insert(i, word.to_string());
        out.pos_tags.insert(i, tag);
        out.spaces.insert(i, true);
        if i == 0 && out.spaces.len() > 1 {
            out.spaces[1] = true;
        }
        let anchor = i.saturating_sub(1);
        if out.sentence_bounds.is_empty() {
            out.sentence_bounds.push((0, 1));
        } else {
            let host = self.sentence_of(anchor).unwrap_or(out.sentence_bounds.len() - 1);
            for (s, bound) in out.sentence_bounds.iter_mut().enumerate() {
                if s == host {
                    bound.1 += 1;
                } else if s > host {
                    bound.0 += 1;
                    bound.1 += 1;
                }
            }
        }
        out.refresh_raw();
        out
    }

    /// Removes token `i`; a sentence left empty disappears.
    pub fn with_removal(&self, i: usize) -> TokenizedText {
        let mut out = self.clone();
        out.tokens.remove(i);
        out.pos_tags.remove(i);
        out.spaces.remove(i);
        let host = self.sentence_of(i);
        let mut bounds = Vec::with_capacity(self.sentence_bounds.len());
        for (s, &(a, b)) in self.sentence_bounds.iter().enumerate() {
            let bound = match host {
                Some(h) if s == h => (a, b - 1),
                Some(h) if s > h => (a - 1, b - 1),
                _ => (a, b),
            };
            if bound.0 < bound.1 {
                bounds.push(bound);
            }
        }
        out.sentence_bounds = bounds;
        out.refresh_raw();
        out
    }

    /// The text with sentence `s` dropped.
    pub fn without_sentence(&self, s: usize) -> TokenizedText {
        let (a, b) = self.sentence_bounds[s];
        let width = b - a;
        let mut out = self.clone();
        out.tokens.drain(a..b);
        out.pos_tags.drain(a..b);
        out.spaces.drain(a..b);
        out.sentence_bounds = self
            .sentence_bounds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != s)
            .map(|(i, &(x, y))| if i > s { (x - width, y - width) } else { (x, y) })
            .collect();
        out.refresh_raw();
        out
    }
}
