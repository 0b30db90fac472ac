//! Run configuration: a JSON object or `key = value` lines, overridden by
//! command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use tce_core::operators::OperatorSet;
use tce_core::SearchConfig;

use crate::io::IoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// `csv` or `jsonl`; guessed from the extension when absent.
    pub format: Option<String>,
    /// Raw label to class name.
    pub label_map: BTreeMap<String, String>,
    /// Undersample the majority classes before splitting.
    pub balance: bool,
    pub artifacts: PathBuf,
    /// Base URL of a remote scorer service.
    pub remote: Option<String>,
    pub distance: String,
    pub tau: f64,
    pub budget: u64,
    pub alpha: f64,
    pub gamma: f64,
    /// Bank size.
    pub k: usize,
    pub top_n: usize,
    pub operators: String,
    pub seed: u64,
    pub sentence_threshold: usize,
    pub sample_size: Option<usize>,
    pub checkpoints: Vec<u64>,
    pub deadline_ms: Option<u64>,
    /// Significance level of the bank and POS tests.
    pub significance: f64,
    /// Size of the held-out explanation split.
    pub explain_size: usize,
    pub train_fraction: f64,
    pub n_examples: usize,
    pub nb_smoothing: f64,
    pub ngram_order: usize,
    pub ngram_k: f64,
    pub vector_dim: usize,
    pub vector_window: usize,
    pub lexicon: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub antonyms: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        Self {
            dataset: None,
            format: None,
            label_map: BTreeMap::new(),
            balance: false,
            artifacts: PathBuf::from("artifacts"),
            remote: None,
            distance: "levenshtein".into(),
            tau: search.tau,
            budget: search.budget,
            alpha: search.alpha,
            gamma: search.gamma,
            k: 10,
            top_n: search.top_n,
            operators: "full".into(),
            seed: 0,
            sentence_threshold: search.sentence_threshold,
            sample_size: None,
            checkpoints: vec![50, 200, 500, 1000, 2000],
            deadline_ms: None,
            significance: tce_core::banks::DEFAULT_ALPHA,
            explain_size: 200,
            train_fraction: 0.8,
            n_examples: 200,
            nb_smoothing: 1.0,
            ngram_order: 2,
            ngram_k: 0.1,
            vector_dim: 50,
            vector_window: 2,
            lexicon: None,
            vectors: None,
            antonyms: None,
        }
    }
}

impl RunConfig {
    /// Reads a config file. A file whose first non-blank character is `{` is
    /// JSON; anything else is `key = value` lines.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let source = fs::read_to_string(path).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&source).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))?;
        config.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(config)
    }

    pub fn parse(source: &str) -> Result<Self, String> {
        let value = if source.trim_start().starts_with('{') {
            serde_json::from_str(source).map_err(|e| e.to_string())?
        } else {
            key_values(source)?
        };
        serde_json::from_value(value).map_err(|e| e.to_string())
    }

    /// Makes relative paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.dataset, &mut self.lexicon, &mut self.vectors, &mut self.antonyms]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.artifacts);
    }

    pub fn operator_set(&self) -> Result<OperatorSet, String> {
        self.operators.parse().map_err(|e| format!("{e}"))
    }

    pub fn search_config(&self) -> Result<SearchConfig, String> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.gamma > 0.0) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err("checkpoints must be strictly ascending".into());
        }
        Ok(SearchConfig {
            tau: self.tau,
            budget: self.budget,
            alpha: self.alpha,
            gamma: self.gamma,
            top_n: self.top_n,
            operators: self.operator_set()?,
            sentence_threshold: self.sentence_threshold,
            sample_size: self.sample_size,
            seed: self.seed,
            ..SearchConfig::default()
        })
    }
}

/// `key = value` lines into a JSON object. `#` starts a comment, `[name]`
/// opens a table and `a.b = v` is a dotted key. Values that parse as JSON
/// (numbers, booleans, quoted strings, arrays) keep that type; anything
/// else is a bare string.
fn key_values(source: &str) -> Result<Value, String> {
    let mut root = Map::new();
    let mut table: Option<String> = None;
    for (idx, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = Some(name.trim().to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", idx + 1))?;
        let key = key.trim().trim_matches('"');
        let value = value.trim();
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let (table_name, leaf) = match (&table, key.split_once('.')) {
            (Some(t), _) => (Some(t.as_str()), key),
            (None, Some((t, k))) => (Some(t), k),
            (None, None) => (None, key),
        };
        let slot = match table_name {
            None => &mut root,
            Some(t) => root
                .entry(t.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .ok_or_else(|| format!("line {}: `{t}` is not a table", idx + 1))?,
        };
        // table entries are string maps even when a value looks numeric
        let value = match value {
            Value::Number(n) if table_name.is_some() => Value::String(n.to_string()),
            v => v,
        };
        slot.insert(leaf.to_string(), value);
    }
    Ok(Value::Object(root))
}
