//! HTTP client for a scorer service speaking the JSON wire protocol:
//! `POST /classify`, `/predict`, `/lm_loss`, `/mask_fill`, `/embed` and
//! `GET /labels`.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tce_core::models::{CallKind, Classifier, Embedder, FillMode, MaskFillSuggester, ModelError, PlausibilityScorer, ScoredSuggestion};
use tce_core::TokenizedText;

/// One service implements all four scorer interfaces.
pub struct RemoteScorer {
    base: String,
    agent: ureq::Agent,
    labels: Vec<String>,
    dim: usize,
}

#[derive(Deserialize)]
struct Labels {
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct Proba {
    proba: f64,
}

#[derive(Deserialize)]
struct Predicted {
    label: String,
}

#[derive(Deserialize)]
struct Loss {
    loss: f64,
}

#[derive(Deserialize)]
struct Suggestions {
    suggestions: Vec<ScoredSuggestion>,
}

#[derive(Deserialize)]
struct Embedding {
    vector: Vec<f64>,
}

impl RemoteScorer {
    /// Connects to `base` (for example `http://127.0.0.1:8080`) and fetches
    /// the label set.
    pub fn connect(base: &str) -> Result<Self, ModelError> {
        let mut scorer = Self {
            base: base.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
            labels: Vec::new(),
            dim: 0,
        };
        let labels: Labels = scorer.call(CallKind::Classifier, "/labels", None)?;
        if labels.labels.len() < 2 {
            return Err(scorer.error(CallKind::Classifier, "/labels", "fewer than two labels".into()));
        }
        scorer.labels = labels.labels;
        Ok(scorer)
    }

    /// Calls `/embed` once to learn the vector dimension.
    pub fn with_embedder(mut self) -> Result<Self, ModelError> {
        let probe: Embedding = self.call(CallKind::Embedder, "/embed", Some(json!({"text": ""})))?;
        self.dim = probe.vector.len();
        Ok(self)
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn error(&self, kind: CallKind, path: &str, message: String) -> ModelError {
        ModelError::Scorer {
            endpoint: format!("{}{path}", self.base),
            kind,
            message,
        }
    }

    fn call<T: DeserializeOwned>(&self, kind: CallKind, path: &str, body: Option<Value>) -> Result<T, ModelError> {
        let url = format!("{}{path}", self.base);
        let response = match body {
            Some(body) => self.agent.post(&url).send_json(body),
            None => self.agent.get(&url).call(),
        };
        let response = response.map_err(|e| match e {
            ureq::Error::Status(code, r) => self.error(kind, path, format!("HTTP {code} {}", r.status_text())),
            ureq::Error::Transport(t) => self.error(kind, path, t.to_string()),
        })?;
        response
            .into_json::<T>()
            .map_err(|e| self.error(kind, path, format!("schema mismatch: {e}")))
    }

    fn label_index(&self, label: &str) -> Result<usize, ModelError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| self.error(CallKind::Classifier, "/predict", format!("unknown label `{label}`")))
    }
}

impl Classifier for RemoteScorer {
    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn probabilities(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        (0..self.labels.len()).map(|i| self.classify_proba(text, i)).collect()
    }

    fn classify_proba(&self, text: &TokenizedText, label: usize) -> Result<f64, ModelError> {
        let label = self.labels.get(label).ok_or_else(|| ModelError::UnknownLabel(label.to_string()))?;
        let r: Proba = self.call(
            CallKind::Classifier,
            "/classify",
            Some(json!({"text": text.detokenized(), "label": label})),
        )?;
        Ok(r.proba)
    }

    fn predict(&self, text: &TokenizedText) -> Result<usize, ModelError> {
        let r: Predicted = self.call(CallKind::Classifier, "/predict", Some(json!({"text": text.detokenized()})))?;
        self.label_index(&r.label)
    }
}

impl PlausibilityScorer for RemoteScorer {
    fn lm_loss(&self, text: &TokenizedText) -> Result<f64, ModelError> {
        let r: Loss = self.call(CallKind::Lm, "/lm_loss", Some(json!({"text": text.detokenized()})))?;
        Ok(r.loss)
    }
}

impl MaskFillSuggester for RemoteScorer {
    fn mask_fill(
        &self,
        tokens: &[String],
        position: usize,
        mode: FillMode,
        class: &str,
        top_n: usize,
    ) -> Result<Vec<ScoredSuggestion>, ModelError> {
        let body = json!({
            "tokens": tokens,
            "position": position,
            "mode": mode.as_str(),
            "class": class,
            "top_n": top_n,
        });
        let mut r: Suggestions = self.call(CallKind::MaskFill, "/mask_fill", Some(body))?;
        r.suggestions.sort_by(|a, b| b.score.total_cmp(&a.score));
        r.suggestions.truncate(top_n);
        Ok(r.suggestions)
    }
}

impl Embedder for RemoteScorer {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &TokenizedText) -> Result<Vec<f64>, ModelError> {
        let r: Embedding = self.call(CallKind::Embedder, "/embed", Some(json!({"text": text.detokenized()})))?;
        Ok(r.vector)
    }

    fn embed_word(&self, word: &str) -> Result<Option<Vec<f64>>, ModelError> {
        let r: Embedding = self.call(CallKind::Embedder, "/embed", Some(json!({"text": word.to_lowercase()})))?;
        Ok(Some(r.vector))
    }
}
