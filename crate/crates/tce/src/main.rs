use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use tce::artifacts::{preprocess, Artifacts};
use tce::config::RunConfig;
use tce::harness::{self, Engine, Job, RunSettings};
use tce::io::{self, DatasetFormat};
use tce::remote::RemoteScorer;
use tce::synthetic;
use tce_core::PosLexicon;

#[derive(Parser)]
#[command(name = "tce", version, about = "Counterfactual explanations for text classifiers")]
struct Cli {
    /// JSON or key=value run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Expensive-call budget per run.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// levenshtein, cosine or tree.
    #[arg(long, global = true)]
    distance: Option<String>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Target label, by name or index.
    #[arg(long, global = true)]
    target: Option<String>,
    /// full, no-dwb, no-antonyms or a comma list of operators.
    #[arg(long, global = true)]
    operators: Option<String>,
    /// Wall-clock limit per run.
    #[arg(long, global = true)]
    deadline_ms: Option<u64>,
    /// Scorer service base URL.
    #[arg(long, global = true)]
    remote: Option<String>,
    #[arg(long, global = true)]
    artifacts: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the built-in scorers and build the word banks.
    Preprocess {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Explain one text.
    Explain { text: String },
    /// Explain a sample of the explanation split.
    Batch {
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long, default_value = "report.jsonl")]
        out: PathBuf,
    },
    /// Compare the full, no-DWB and no-antonym operator sets.
    Ablation {
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long, default_value = "ablation.json")]
        out: PathBuf,
    },
    /// Best-so-far distance at expensive-call checkpoints.
    Anytime {
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<u64>>,
        #[arg(long, default_value = "anytime")]
        out: PathBuf,
    },
    /// Write the planted-word synthetic dataset and its word vectors.
    Synth {
        #[arg(short, long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value = "synthetic.jsonl")]
        out: PathBuf,
        #[arg(long, default_value = "synthetic.vectors.txt")]
        vectors: PathBuf,
    },
}

type Fallible<T> = Result<T, String>;

fn configure(cli: &Cli) -> Fallible<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(v) = cli.seed {
        c.seed = v;
    }
    if let Some(v) = cli.budget {
        c.budget = v;
    }
    if let Some(v) = &cli.distance {
        c.distance = v.clone();
    }
    if let Some(v) = cli.tau {
        c.tau = v;
    }
    if let Some(v) = &cli.operators {
        c.operators = v.clone();
    }
    if let Some(v) = cli.deadline_ms {
        c.deadline_ms = Some(v);
    }
    if let Some(v) = &cli.remote {
        c.remote = Some(v.clone());
    }
    if let Some(v) = &cli.artifacts {
        c.artifacts = v.clone();
    }
    Ok(c)
}

fn settings(config: &RunConfig) -> Fallible<RunSettings> {
    let search = config.search_config()?;
    Ok(RunSettings {
        checkpoints: config.checkpoints.clone(),
        deadline: config.deadline_ms.map(Duration::from_millis),
        ..RunSettings::new(search, &config.distance)
    })
}

fn engine(config: &RunConfig) -> Fallible<Engine> {
    let artifacts = Artifacts::load(&config.artifacts).map_err(|e| {
        format!("{e} (run `tce preprocess` first to create {})", config.artifacts.display())
    })?;
    let remote = match &config.remote {
        Some(url) => Some(
            RemoteScorer::connect(url)
                .and_then(|r| if config.distance == "cosine" { r.with_embedder() } else { Ok(r) })
                .map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    Engine::new(artifacts, remote)
}

fn target(engine: &Engine, cli: &Cli) -> Fallible<Option<usize>> {
    cli.target
        .as_deref()
        .map(|t| {
            engine
                .label_index(t)
                .ok_or_else(|| format!("unknown target `{t}`; labels are {:?}", engine.artifacts.labels()))
        })
        .transpose()
}

fn write(path: &Path, body: &str) -> Fallible<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn batch_jobs(engine: &Engine, config: &RunConfig, cli: &Cli, n: Option<usize>) -> Fallible<Vec<Job>> {
    let examples = harness::sample_examples(&engine.artifacts.split, n.unwrap_or(config.n_examples), config.seed);
    harness::plan_jobs(engine, &examples, target(engine, cli)?).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Fallible<()> {
    let config = configure(&cli)?;
    match &cli.command {
        Command::Synth { n, out, vectors } => {
            io::write_jsonl(out, &synthetic::planted_dataset(*n, config.seed)).map_err(|e| e.to_string())?;
            write(vectors, &synthetic::planted_vectors(config.seed).to_text())?;
            println!("wrote {n} texts to {} and vectors to {}", out.display(), vectors.display());
        }
        Command::Preprocess { dataset } => {
            let path = dataset
                .clone()
                .or_else(|| config.dataset.clone())
                .ok_or("no dataset: pass --dataset or set `dataset` in the config")?;
            let format = match &config.format {
                Some(f) => f.parse::<DatasetFormat>(),
                None => DatasetFormat::from_path(&path),
            }
            .map_err(|e| e.to_string())?;
            let corpus = io::load_dataset(&path, format, &config.label_map).map_err(|e| e.to_string())?;
            let lexicon = match &config.lexicon {
                Some(p) => io::load_lexicon(p).map_err(|e| e.to_string())?,
                None => PosLexicon::builtin(),
            };
            let antonyms = match &config.antonyms {
                Some(p) => io::load_antonyms(p).map_err(|e| e.to_string())?,
                None => io::builtin_antonyms(),
            };
            let vectors = config
                .vectors
                .as_deref()
                .map(io::load_vectors)
                .transpose()
                .map_err(|e| e.to_string())?;
            let a = preprocess(corpus, &config, lexicon, antonyms, vectors).map_err(|e| e.to_string())?;
            a.save(&config.artifacts).map_err(|e| e.to_string())?;
            println!(
                "{} examples: {} explain, {} train, {} test",
                a.corpus.len(),
                a.split.explain.len(),
                a.split.train.len(),
                a.split.test.len()
            );
            if let Some(acc) = a.test_accuracy() {
                println!("test accuracy {acc:.3}");
            }
            let selected: Vec<String> = a.selection.differentiating.iter().map(|t| t.to_string()).collect();
            println!("differentiating POS: {}", if selected.is_empty() { "none".into() } else { selected.join(", ") });
            for line in a.bank_summary() {
                println!("{line}");
            }
            println!("artifacts in {}", config.artifacts.display());
        }
        Command::Explain { text } => {
            let engine = engine(&config)?;
            let settings = settings(&config)?;
            let x = engine.tokenize(text);
            let predicted = engine.classifier().predict(&x).map_err(|e| e.to_string())?;
            let target = match target(&engine, &cli)? {
                Some(t) => t,
                None if engine.artifacts.labels().len() == 2 => 1 - predicted,
                None => return Err("--target is required with more than two labels".into()),
            };
            let job = Job {
                example: None,
                text: text.clone(),
                predicted,
                target,
            };
            let record = harness::run_job(&engine, &settings, &job).map_err(|e| e.to_string())?;
            if let Some(e) = &record.error {
                return Err(e.clone());
            }
            match record.result.explanation() {
                Some(s) => println!("{s}"),
                None => println!("No counterfactual found."),
            }
            println!("{}", serde_json::to_string(&record).expect("records serialize"));
        }
        Command::Batch { n, out } => {
            let engine = engine(&config)?;
            let settings = settings(&config)?;
            let jobs = batch_jobs(&engine, &config, &cli, *n)?;
            let records = harness::run_jobs(&engine, &settings, &jobs).map_err(|e| e.to_string())?;
            write(out, &harness::jsonl(&records))?;
            let agg = harness::aggregate(&records, &settings.distance);
            let footer = with_suffix(out, ".aggregate.json");
            write(&footer, &pretty(&agg))?;
            print!("{}", pretty(&agg));
            eprintln!("{} records in {}, aggregate in {}", records.len(), out.display(), footer.display());
        }
        Command::Ablation { n, out } => {
            let engine = engine(&config)?;
            let settings = settings(&config)?;
            let jobs = batch_jobs(&engine, &config, &cli, *n)?;
            let (report, _) = harness::ablation(&engine, &settings, &jobs).map_err(|e| e.to_string())?;
            write(out, &pretty(&report))?;
            println!("{:<12} {:>6} {:>14}", "variant", "found", "mean distance");
            for v in &report.variants {
                let found = v.aggregate.records - v.aggregate.sources.get("none").copied().unwrap_or(0);
                let m = v.aggregate.mean_distance.map_or("-".into(), |d| format!("{d:.4}"));
                println!("{:<12} {:>6} {:>14}", v.variant, found, m);
            }
            for p in &report.paired {
                let f = |v: Option<f64>| v.map_or("-".into(), |d| format!("{d:.4}"));
                println!(
                    "{} - {}: mean difference {} over {} pairs, t = {}, p = {}",
                    p.variant,
                    p.baseline,
                    f(p.mean_difference),
                    p.pairs,
                    f(p.t_statistic),
                    f(p.p_value)
                );
            }
        }
        Command::Anytime { n, checkpoints, out } => {
            let engine = engine(&config)?;
            let mut settings = settings(&config)?;
            if let Some(c) = checkpoints {
                if c.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("checkpoints must be strictly ascending".into());
                }
                settings.checkpoints = c.clone();
            }
            let jobs = batch_jobs(&engine, &config, &cli, *n)?;
            let records = harness::run_jobs(&engine, &settings, &jobs).map_err(|e| e.to_string())?;
            let curve = harness::anytime_curve(&records, &settings.checkpoints);
            write(&out.with_extension("csv"), &harness::anytime_csv(&records, &curve))?;
            write(&out.with_extension("json"), &pretty(&curve))?;
            for (ec, m) in curve.checkpoints.iter().zip(&curve.means) {
                println!("{ec:>6} EC  {}", m.map_or("-".into(), |d| format!("{d:.4}")));
            }
            eprintln!("{} of {} runs have a value at every checkpoint", curve.counted, curve.runs);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
