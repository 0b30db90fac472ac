//! Dataset, lexicon and word-vector files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use tce_core::operators::{AntonymLexicon, AntonymError};
use tce_core::text::LexiconError;
use tce_core::{Corpus, CorpusError, ModelError, PosLexicon};
use tce_core::models::WordVectors;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {source}", path.display())]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error("{0}")]
    Config(String),
}

impl IoError {
    fn read(path: &Path, source: std::io::Error) -> Self {
        IoError::Read {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn write(path: &Path, source: std::io::Error) -> Self {
        IoError::Write {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DatasetFormat::Csv => "csv",
            DatasetFormat::Jsonl => "jsonl",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Jsonl,
}

impl DatasetFormat {
    /// Guesses the format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self, IoError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        ext.parse()
            .map_err(|_| IoError::Config(format!("{}: unknown dataset format `{ext}`", path.display())))
    }
}

impl FromStr for DatasetFormat {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DatasetFormat::Csv),
            "jsonl" | "ndjson" => Ok(DatasetFormat::Jsonl),
            other => Err(IoError::Config(format!("unknown dataset format `{other}`"))),
        }
    }
}

#[derive(Deserialize)]
struct Record {
    text: String,
    label: String,
}

/// Loads a `text,label` CSV or a JSON-lines file. Labels are ordered by first
/// appearance. `label_map` renames raw labels; unmapped labels pass through.
pub fn load_dataset(path: &Path, format: DatasetFormat, label_map: &BTreeMap<String, String>) -> Result<Corpus, IoError> {
    let source = fs::read_to_string(path).map_err(|e| IoError::read(path, e))?;
    let records = match format {
        DatasetFormat::Csv => parse_csv(path, &source)?,
        DatasetFormat::Jsonl => parse_jsonl(path, &source)?,
    };
    let pairs = records.into_iter().map(|r| {
        let label = label_map.get(&r.label).cloned().unwrap_or(r.label);
        (r.text, label)
    });
    Corpus::from_pairs(pairs).map_err(|source| IoError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_jsonl(path: &Path, source: &str) -> Result<Vec<Record>, IoError> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: Record = serde_json::from_str(line).map_err(|e| IoError::parse(path, idx + 1, e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}

fn parse_csv(path: &Path, source: &str) -> Result<Vec<Record>, IoError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::parse(path, 1, e.to_string()))?.clone();
    for column in ["text", "label"] {
        if source.trim().is_empty() {
            break;
        }
        if !headers.iter().any(|h| h == column) {
            return Err(IoError::parse(path, 1, format!("missing `{column}` column")));
        }
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<Record>() {
        let r = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            IoError::parse(path, line, e.to_string())
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Writes `{"text", "label"}` records, one per line.
pub fn write_jsonl(path: &Path, corpus: &Corpus) -> Result<(), IoError> {
    let mut out = String::new();
    for e in corpus.examples() {
        let line = serde_json::json!({"text": e.text, "label": corpus.labels()[e.label]});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| IoError::write(path, e))
}

pub fn load_lexicon(path: &Path) -> Result<PosLexicon, IoError> {
    let source = fs::read_to_string(path).map_err(|e| IoError::read(path, e))?;
    PosLexicon::parse(&source).map_err(|LexiconError { line, message }| IoError::parse(path, line, message))
}

pub fn load_antonyms(path: &Path) -> Result<AntonymLexicon, IoError> {
    let source = fs::read_to_string(path).map_err(|e| IoError::read(path, e))?;
    AntonymLexicon::parse(&source).map_err(|AntonymError { line, message }| IoError::parse(path, line, message))
}

pub fn load_vectors(path: &Path) -> Result<WordVectors, IoError> {
    let source = fs::read_to_string(path).map_err(|e| IoError::read(path, e))?;
    WordVectors::parse(&source).map_err(|e| match e {
        ModelError::Format { line, message } => IoError::parse(path, line, message),
        other => IoError::parse(path, 0, other.to_string()),
    })
}

/// The antonym pairs shipped with the crate.
pub fn builtin_antonyms() -> AntonymLexicon {
    AntonymLexicon::parse(include_str!("../data/antonyms.tsv")).expect("shipped antonym file parses")
}
