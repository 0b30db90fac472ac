//! Batch explanation, operator ablations and anytime curves.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tce_core::distance::{distance_by_key, DistanceError, DistanceFn, DISTANCE_KEYS};
use tce_core::operators::OperatorSet;
use tce_core::search::{explain, Interrupt, Models};
use tce_core::stats::paired_t_test;
use tce_core::text::tokenize;
use tce_core::{
    Classifier, CounterfactualResult, Embedder, MaskFillSuggester, ModelError, PlausibilityScorer, SearchConfig,
    SearchProblem, Source, TokenizedText,
};

use crate::artifacts::{Artifacts, Split};
use crate::remote::RemoteScorer;

/// Interrupts once a wall-clock deadline has passed.
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn after(limit: Option<Duration>) -> Self {
        Deadline(limit.map(|d| Instant::now() + d))
    }
}

impl Interrupt for Deadline {
    fn interrupted(&self) -> bool {
        self.0.is_some_and(|t| Instant::now() >= t)
    }
}

/// Artifacts plus, optionally, a remote service that replaces the built-in
/// classifier, language model, suggester and embedder.
pub struct Engine {
    pub artifacts: Artifacts,
    pub remote: Option<RemoteScorer>,
    pool: Vec<TokenizedText>,
}

impl Engine {
    pub fn new(artifacts: Artifacts, remote: Option<RemoteScorer>) -> Result<Self, String> {
        if let Some(r) = &remote {
            if r.labels() != artifacts.labels() {
                return Err(format!(
                    "remote labels {:?} differ from the dataset labels {:?}",
                    r.labels(),
                    artifacts.labels()
                ));
            }
        }
        let pool = artifacts.pool();
        Ok(Self { artifacts, remote, pool })
    }

    pub fn classifier(&self) -> &dyn Classifier {
        match &self.remote {
            Some(r) => r,
            None => &self.artifacts.classifier,
        }
    }

    fn lm(&self) -> &dyn PlausibilityScorer {
        match &self.remote {
            Some(r) => r,
            None => &self.artifacts.lm,
        }
    }

    fn suggester(&self) -> &dyn MaskFillSuggester {
        match &self.remote {
            Some(r) => r,
            None => &self.artifacts.suggesters,
        }
    }

    pub fn embedder(&self) -> &dyn Embedder {
        match &self.remote {
            Some(r) => r,
            None => &self.artifacts.vectors,
        }
    }

    pub fn models(&self) -> Models<'_> {
        Models {
            classifier: self.classifier(),
            lm: self.lm(),
            suggester: self.suggester(),
            tagger: &self.artifacts.lexicon,
            banks: &self.artifacts.banks,
            selection: &self.artifacts.selection,
            antonyms: &self.artifacts.antonyms,
        }
    }

    pub fn distance(&self, key: &str) -> Result<Box<dyn DistanceFn + '_>, DistanceError> {
        distance_by_key(key, self.embedder())
    }

    pub fn pool(&self) -> &[TokenizedText] {
        &self.pool
    }

    pub fn tokenize(&self, text: &str) -> TokenizedText {
        tokenize(text, &self.artifacts.lexicon)
    }

    /// A label given by name or by index.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        let labels = self.artifacts.labels();
        labels
            .iter()
            .position(|l| l == label)
            .or_else(|| label.parse::<usize>().ok().filter(|&i| i < labels.len()))
    }
}

/// One explanation to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub example: Option<usize>,
    pub text: String,
    pub predicted: usize,
    pub target: usize,
}

/// The explanation split, or a seeded sample of `n` of it, in dataset order.
pub fn sample_examples(split: &Split, n: usize, seed: u64) -> Vec<usize> {
    if n >= split.explain.len() {
        return split.explain.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, split.explain.len(), n).into_iter().map(|i| split.explain[i]).collect();
    picked.sort_unstable();
    picked
}

/// One job per (example, target). Without a fixed target, every label other
/// than the predicted one is a target.
pub fn plan_jobs(engine: &Engine, examples: &[usize], target: Option<usize>) -> Result<Vec<Job>, ModelError> {
    let mut jobs = Vec::new();
    for &i in examples {
        let text = engine.artifacts.corpus.examples()[i].text.clone();
        let predicted = engine.classifier().predict(&engine.tokenize(&text))?;
        let targets: Vec<usize> = match target {
            Some(t) => vec![t],
            None => (0..engine.artifacts.labels().len()).filter(|&t| t != predicted).collect(),
        };
        for t in targets {
            jobs.push(Job {
                example: Some(i),
                text: text.clone(),
                predicted,
                target: t,
            });
        }
    }
    Ok(jobs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub ec: u64,
    pub best_distance: Option<f64>,
}

/// A report line: the search result plus its anytime checkpoints and the
/// counterfactual measured under every built-in distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub example: Option<usize>,
    #[serde(flatten)]
    pub result: CounterfactualResult,
    pub checkpoints: Vec<Checkpoint>,
    pub distances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub search: SearchConfig,
    pub distance: String,
    pub checkpoints: Vec<u64>,
    pub deadline: Option<Duration>,
}

impl RunSettings {
    pub fn new(search: SearchConfig, distance: &str) -> Self {
        Self {
            search,
            distance: distance.into(),
            checkpoints: vec![50, 200, 500, 1000, 2000],
            deadline: None,
        }
    }

    pub fn with_operators(&self, operators: OperatorSet) -> Self {
        let mut s = self.clone();
        s.search.operators = operators;
        s
    }
}

/// Runs one job. Scorer failures end that run and are kept on the record.
pub fn run_job(engine: &Engine, settings: &RunSettings, job: &Job) -> Result<Record, DistanceError> {
    let distance = engine.distance(&settings.distance)?;
    let labels = engine.artifacts.labels();
    let x = engine.tokenize(&job.text);
    let outcome = SearchProblem::new(x, job.target, &*distance, engine.models(), settings.search)
        .and_then(|p| explain(&p, engine.pool(), &Deadline::after(settings.deadline)).map(|r| (p, r)));
    let (problem, result) = match outcome {
        Ok(ok) => ok,
        Err(e) => {
            let failed = CounterfactualResult {
                original: tce_core::text::clean_text(&job.text),
                counterfactual: None,
                source: Source::None,
                original_label: labels[job.predicted].clone(),
                target_label: labels.get(job.target).cloned().unwrap_or_default(),
                distance: None,
                target_proba: None,
                plausibility_ratio: None,
                ec_used: 0,
                w_h_at_solution: None,
                edit_trace: Vec::new(),
                history: Vec::new(),
            };
            return Ok(Record {
                example: job.example,
                result: failed,
                checkpoints: Vec::new(),
                distances: BTreeMap::new(),
                error: Some(e.to_string()),
            });
        }
    };
    let checkpoints = settings
        .checkpoints
        .iter()
        .map(|&ec| Checkpoint {
            ec,
            best_distance: result.distance_at(ec),
        })
        .collect();
    let mut distances = BTreeMap::new();
    if let Some(cf) = &result.counterfactual {
        let cf = engine.tokenize(cf).cleaned(&engine.artifacts.lexicon);
        for key in DISTANCE_KEYS {
            distances.insert(key.to_string(), engine.distance(key)?.dist(&problem.x_clean, &cf)?);
        }
    }
    Ok(Record {
        example: job.example,
        result,
        checkpoints,
        distances,
        error: None,
    })
}

/// Runs jobs in parallel; records come back in job order.
pub fn run_jobs(engine: &Engine, settings: &RunSettings, jobs: &[Job]) -> Result<Vec<Record>, DistanceError> {
    jobs.par_iter().map(|j| run_job(engine, settings, j)).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Batch summary. Distance means are over records with a counterfactual,
/// ratio means over search-sourced ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub records: usize,
    pub failed: usize,
    pub sources: BTreeMap<String, usize>,
    pub distance: String,
    pub mean_distance: Option<f64>,
    pub means: BTreeMap<String, f64>,
    pub mean_plausibility_ratio: Option<f64>,
    pub max_plausibility_ratio: Option<f64>,
    pub mean_target_proba: Option<f64>,
    pub mean_ec: Option<f64>,
    pub max_ec: u64,
}

pub fn aggregate(records: &[Record], distance: &str) -> Aggregate {
    let mut sources = BTreeMap::new();
    for r in records.iter().filter(|r| r.error.is_none()) {
        let key = serde_json::to_value(r.result.source).expect("source serializes");
        *sources.entry(key.as_str().unwrap_or_default().to_string()).or_insert(0) += 1;
    }
    let found = || records.iter().filter(|r| r.result.counterfactual.is_some());
    let searched = || records.iter().filter(|r| r.result.source == Source::Search);
    let means = DISTANCE_KEYS
        .iter()
        .filter_map(|k| mean(found().filter_map(|r| r.distances.get(*k).copied())).map(|m| (k.to_string(), m)))
        .collect();
    Aggregate {
        records: records.len(),
        failed: records.iter().filter(|r| r.error.is_some()).count(),
        sources,
        distance: distance.into(),
        mean_distance: mean(found().filter_map(|r| r.result.distance)),
        means,
        mean_plausibility_ratio: mean(searched().filter_map(|r| r.result.plausibility_ratio)),
        max_plausibility_ratio: searched().filter_map(|r| r.result.plausibility_ratio).reduce(f64::max),
        mean_target_proba: mean(found().filter_map(|r| r.result.target_proba)),
        mean_ec: mean(records.iter().map(|r| r.result.ec_used as f64)),
        max_ec: records.iter().map(|r| r.result.ec_used).max().unwrap_or(0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub aggregate: Aggregate,
}

/// `variant - baseline` over the jobs where both found a counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub variant: String,
    pub baseline: String,
    pub pairs: usize,
    pub mean_difference: Option<f64>,
    pub t_statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub variants: Vec<VariantSummary>,
    pub paired: Vec<PairedComparison>,
}

pub const ABLATION_VARIANTS: [&str; 3] = ["full", "no-dwb", "no-antonyms"];

pub fn paired_comparison(variant: &str, baseline: &str, base: &[Record], other: &[Record]) -> PairedComparison {
    let (a, b): (Vec<f64>, Vec<f64>) = base
        .iter()
        .zip(other)
        .filter_map(|(x, y)| Some((x.result.distance?, y.result.distance?)))
        .unzip();
    let test = paired_t_test(&a, &b);
    PairedComparison {
        variant: variant.into(),
        baseline: baseline.into(),
        pairs: a.len(),
        mean_difference: test.map(|t| t.mean_difference).or_else(|| mean(a.iter().zip(&b).map(|(x, y)| y - x))),
        t_statistic: test.map(|t| t.t_statistic),
        p_value: test.map(|t| t.p_value),
    }
}

/// The same jobs under the full, no-DWB and no-antonym operator sets.
pub fn ablation(engine: &Engine, settings: &RunSettings, jobs: &[Job]) -> Result<(AblationReport, Vec<Vec<Record>>), DistanceError> {
    let mut runs = Vec::new();
    for name in ABLATION_VARIANTS {
        let ops: OperatorSet = name.parse().expect("variant names parse");
        runs.push(run_jobs(engine, &settings.with_operators(ops), jobs)?);
    }
    let variants = ABLATION_VARIANTS
        .iter()
        .zip(&runs)
        .map(|(name, records)| VariantSummary {
            variant: name.to_string(),
            aggregate: aggregate(records, &settings.distance),
        })
        .collect();
    let paired = ABLATION_VARIANTS[1..]
        .iter()
        .zip(&runs[1..])
        .map(|(name, records)| paired_comparison(name, ABLATION_VARIANTS[0], &runs[0], records))
        .collect();
    Ok((AblationReport { variants, paired }, runs))
}

/// Mean best-so-far distance per checkpoint over the runs that have a value
/// at every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnytimeCurve {
    pub checkpoints: Vec<u64>,
    pub means: Vec<Option<f64>>,
    pub runs: usize,
    pub counted: usize,
}

fn complete(r: &Record) -> Option<Vec<f64>> {
    r.checkpoints.iter().map(|c| c.best_distance).collect()
}

pub fn anytime_curve(records: &[Record], checkpoints: &[u64]) -> AnytimeCurve {
    let rows: Vec<Vec<f64>> = records.iter().filter_map(complete).filter(|r| r.len() == checkpoints.len()).collect();
    let means = (0..checkpoints.len()).map(|j| mean(rows.iter().map(|r| r[j]))).collect();
    AnytimeCurve {
        checkpoints: checkpoints.to_vec(),
        means,
        runs: records.len(),
        counted: rows.len(),
    }
}

/// One row per run and a final `mean` row; one column per checkpoint.
pub fn anytime_csv(records: &[Record], curve: &AnytimeCurve) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |v: Option<f64>| v.map(|d| d.to_string()).unwrap_or_default();
    let mut header = vec!["run".to_string(), "example".to_string(), "target".to_string()];
    header.extend(curve.checkpoints.iter().map(u64::to_string));
    w.write_record(&header).expect("in-memory csv");
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            r.example.map(|e| e.to_string()).unwrap_or_default(),
            r.result.target_label.clone(),
        ];
        row.extend(r.checkpoints.iter().map(|c| fmt(c.best_distance)));
        w.write_record(&row).expect("in-memory csv");
    }
    let mut row = vec!["mean".to_string(), String::new(), String::new()];
    row.extend(curve.means.iter().map(|m| fmt(*m)));
    w.write_record(&row).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// JSON-lines report body.
pub fn jsonl(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}
