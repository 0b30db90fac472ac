//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any of them fails.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tce::artifacts::preprocess;
use tce::harness::{self, Engine, Job, Record, RunSettings};
use tce::io::builtin_antonyms;
use tce::synthetic::{planted_dataset, planted_vectors};
use tce::RunConfig;
use tce_core::banks::{manova_permutation_test, manova_pillai, overrepresentation_test};
use tce_core::distance::{cosine_distance, word_levenshtein, zhang_shasha, LabeledTree};
use tce_core::models::PlausibilityScorer;
use tce_core::search::{heuristic, sentence_importance};
use tce_core::{Corpus, PosLexicon, SearchConfig, Source};

const BUDGET: u64 = 2000;
const TAU: f64 = 0.5;
const CHECKPOINTS: [u64; 5] = [50, 200, 500, 1000, 2000];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The synthetic planted-word setting shared by several criteria.
struct Synthetic {
    engine: Engine,
    jobs: Vec<Job>,
    settings: RunSettings,
    records: Vec<Record>,
    batch_time: Duration,
    prepare_time: Duration,
    ablation: Option<(harness::AblationReport, Vec<Vec<Record>>)>,
}

fn synthetic_engine(n: usize, seed: u64) -> Engine {
    let config = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let artifacts = preprocess(
        planted_dataset(n, seed),
        &config,
        PosLexicon::builtin(),
        builtin_antonyms(),
        Some(planted_vectors(seed)),
    )
    .expect("synthetic preprocessing");
    Engine::new(artifacts, None).expect("engine")
}

impl Synthetic {
    fn run() -> Self {
        let t0 = Instant::now();
        let engine = synthetic_engine(500, 1);
        let examples = harness::sample_examples(&engine.artifacts.split, 200, 1);
        let jobs = harness::plan_jobs(&engine, &examples, None).expect("jobs");
        let prepare_time = t0.elapsed();
        let search = SearchConfig {
            tau: TAU,
            budget: BUDGET,
            ..SearchConfig::default()
        };
        let settings = RunSettings {
            checkpoints: CHECKPOINTS.to_vec(),
            ..RunSettings::new(search, "levenshtein")
        };
        let t1 = Instant::now();
        let records = harness::run_jobs(&engine, &settings, &jobs).expect("batch");
        let batch_time = t1.elapsed();
        Self {
            engine,
            jobs,
            settings,
            records,
            batch_time,
            prepare_time,
            ablation: None,
        }
    }
}

fn validity(s: &Synthetic) -> Check {
    ensure(s.records.len() == 200, || format!("{} records instead of 200", s.records.len()))?;
    let classifier = s.engine.classifier();
    let mut checked = 0;
    for r in &s.records {
        ensure(r.error.is_none(), || format!("run failed: {:?}", r.error))?;
        if r.result.source == Source::None {
            continue;
        }
        let cf = s.engine.tokenize(r.result.counterfactual.as_deref().expect("counterfactual"));
        let target = s.engine.label_index(&r.result.target_label).expect("target label");
        let sigma = classifier.classify_proba(&cf, target).expect("classify");
        let predicted = classifier.predict(&cf).expect("predict");
        ensure(sigma > TAU && predicted == target, || {
            format!("`{}`: sigma {sigma}, predicted {predicted}, target {target}", cf.raw)
        })?;
        checked += 1;
    }
    let elapsed = s.prepare_time + s.batch_time;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked}/200 results valid, {:.1}s", elapsed.as_secs_f64()))
}

fn anytime(s: &Synthetic) -> Check {
    for r in &s.records {
        let values: Vec<f64> = r
            .checkpoints
            .iter()
            .map(|c| c.best_distance.unwrap_or(f64::INFINITY))
            .collect();
        ensure(values.windows(2).all(|w| w[1] <= w[0]), || format!("{values:?} increases"))?;
    }
    let curve = harness::anytime_curve(&s.records, &CHECKPOINTS);
    let (first, last) = (curve.means[0], curve.means[CHECKPOINTS.len() - 1]);
    let (Some(first), Some(last)) = (first, last) else {
        return Err("no run has a value at every checkpoint".into());
    };
    ensure(last <= first, || format!("mean {last} at 2000 EC above {first} at 50 EC"))?;
    let means: Vec<String> = curve.means.iter().map(|m| format!("{:.4}", m.unwrap_or(f64::NAN))).collect();
    Ok(format!(
        "{} runs monotone, means at {:?} EC = [{}] over {} runs",
        s.records.len(),
        CHECKPOINTS,
        means.join(", "),
        curve.counted
    ))
}

fn plausibility(s: &Synthetic) -> Check {
    let lm = &s.engine.artifacts.lm;
    let mut ratios = Vec::new();
    for r in s.records.iter().filter(|r| r.result.source == Source::Search) {
        let ratio = r.result.plausibility_ratio.expect("search results carry a ratio");
        ensure(ratio <= 1.5, || format!("recorded ratio {ratio}"))?;
        let x = s.engine.tokenize(&r.result.original);
        let cf = s.engine.tokenize(r.result.counterfactual.as_deref().expect("counterfactual"));
        let recomputed = lm.lm_loss(&cf).unwrap() / lm.lm_loss(&x).unwrap();
        ensure(recomputed <= 1.5, || format!("recomputed ratio {recomputed} for `{}`", cf.raw))?;
        ratios.push(ratio);
    }
    ensure(!ratios.is_empty(), || "no search-sourced results".into())?;
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max = ratios.iter().copied().fold(0.0, f64::max);
    Ok(format!("{} search results, mean ratio {mean:.3}, max {max:.3}", ratios.len()))
}

fn table_one() -> Check {
    let mut pairs = Vec::new();
    let rest = [
        "punjabi food i've had in the city",
        "pizza in the north of town",
        "service i've had in years",
        "meal in the american south",
        "place on the continent",
        "food we had in the north",
    ];
    for r in rest {
        pairs.push((format!("the best {r}"), "pos"));
        pairs.push((format!("best {r}"), "pos"));
        pairs.push((format!("great {r}"), "pos"));
        pairs.push((format!("the worst {r}"), "neg"));
        pairs.push((format!("worst {r}"), "neg"));
        pairs.push((format!("awful {r}"), "neg"));
    }
    let corpus = Corpus::from_pairs(pairs).map_err(|e| e.to_string())?;
    let config = RunConfig {
        explain_size: 0,
        train_fraction: 1.0,
        ..RunConfig::default()
    };
    let artifacts = preprocess(corpus, &config, PosLexicon::builtin(), builtin_antonyms(), None).map_err(|e| e.to_string())?;
    let engine = Engine::new(artifacts, None)?;
    let text = "best punjabi food i've had in the north american continent";
    let x = engine.tokenize(text);
    let neg = engine.label_index("neg").expect("neg");
    let pos = engine.label_index("pos").expect("pos");
    let swapped = engine.tokenize("worst punjabi food i've had in the north american continent");
    let classifier = engine.classifier();
    ensure(classifier.predict(&x).unwrap() == pos, || "original is not classified pos".into())?;
    let sigma = classifier.classify_proba(&swapped, neg).unwrap();
    ensure(sigma > TAU, || format!("best -> worst gives sigma {sigma}"))?;

    let search = SearchConfig {
        tau: TAU,
        budget: 200,
        ..SearchConfig::default()
    };
    let settings = RunSettings::new(search, "levenshtein");
    let job = Job {
        example: None,
        text: text.into(),
        predicted: pos,
        target: neg,
    };
    let r = harness::run_job(&engine, &settings, &job).map_err(|e| e.to_string())?;
    ensure(r.error.is_none(), || format!("{:?}", r.error))?;
    let cf = r.result.counterfactual.clone().ok_or("no counterfactual")?;
    let oracle = word_levenshtein(&x.tokens, &engine.tokenize(&cf).tokens) as f64 / x.len() as f64;
    ensure(r.result.source == Source::Search, || format!("source {:?}", r.result.source))?;
    ensure(r.result.distance == Some(0.1) && oracle == 0.1, || {
        format!("`{cf}` at distance {:?}, oracle {oracle}", r.result.distance)
    })?;
    ensure(r.result.edit_trace.len() == 1, || format!("{} edits", r.result.edit_trace.len()))?;
    ensure(r.result.ec_used <= 200, || format!("{} EC", r.result.ec_used))?;
    Ok(format!("`{cf}` at distance 0.1 after {} EC", r.result.ec_used))
}

fn ablation(s: &mut Synthetic) -> Check {
    let (report, runs) = harness::ablation(&s.engine, &s.settings, &s.jobs).map_err(|e| e.to_string())?;
    let mean = |name: &str| {
        report
            .variants
            .iter()
            .find(|v| v.variant == name)
            .and_then(|v| v.aggregate.mean_distance)
    };
    let (full, no_dwb) = (mean("full").ok_or("no full mean")?, mean("no-dwb").ok_or("no no-dwb mean")?);
    let paired = report.paired.iter().find(|p| p.variant == "no-dwb").ok_or("no paired comparison")?;
    let diff = paired.mean_difference.ok_or("no paired difference")?;
    s.ablation = Some((report.clone(), runs));
    ensure(full <= no_dwb, || format!("full {full} above no-dwb {no_dwb}"))?;
    ensure(diff > 0.0, || format!("paired difference {diff}"))?;
    Ok(format!(
        "full {full:.4} <= no-dwb {no_dwb:.4}, paired difference {diff:.4} (t = {:.2}) over {} pairs",
        paired.t_statistic.unwrap_or(f64::NAN),
        paired.pairs
    ))
}

fn brute_levenshtein(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => (brute_levenshtein(ra, rb) + usize::from(x != y))
            .min(brute_levenshtein(ra, b) + 1)
            .min(brute_levenshtein(a, rb) + 1),
    }
}

/// Forest edit distance by the rightmost-root recursion over every
/// delete/insert/match choice, memoized on the forest pair.
fn forest_distance<'a>(
    f: &[&'a LabeledTree],
    g: &[&'a LabeledTree],
    memo: &mut HashMap<(Vec<*const LabeledTree>, Vec<*const LabeledTree>), usize>,
) -> usize {
    if f.is_empty() {
        return g.iter().map(|t| t.size()).sum();
    }
    if g.is_empty() {
        return f.iter().map(|t| t.size()).sum();
    }
    let key = (
        f.iter().map(|t| *t as *const _).collect::<Vec<_>>(),
        g.iter().map(|t| *t as *const _).collect::<Vec<_>>(),
    );
    if let Some(&d) = memo.get(&key) {
        return d;
    }
    let (v, fr) = f.split_last().expect("non-empty");
    let (w, gr) = g.split_last().expect("non-empty");
    let with_children = |rest: &[&'a LabeledTree], t: &'a LabeledTree| {
        let mut out = rest.to_vec();
        out.extend(t.children.iter());
        out
    };
    let delete = forest_distance(&with_children(fr, v), g, memo) + 1;
    let insert = forest_distance(f, &with_children(gr, w), memo) + 1;
    let kids_v: Vec<&LabeledTree> = v.children.iter().collect();
    let kids_w: Vec<&LabeledTree> = w.children.iter().collect();
    let matched =
        forest_distance(fr, gr, memo) + forest_distance(&kids_v, &kids_w, memo) + usize::from(v.label != w.label);
    let d = delete.min(insert).min(matched);
    memo.insert(key, d);
    d
}

fn random_tree(rng: &mut ChaCha8Rng) -> LabeledTree {
    let n = rng.gen_range(1..=6);
    let labels: Vec<String> = (0..n).map(|_| ["a", "b", "c"][rng.gen_range(0..3)].to_string()).collect();
    let parents: Vec<usize> = (1..n).map(|k| rng.gen_range(0..k)).collect();
    fn build(i: usize, parents: &[usize], labels: &[String]) -> LabeledTree {
        let children = (1..labels.len())
            .filter(|&k| parents[k - 1] == i)
            .map(|k| build(k, parents, labels))
            .collect();
        LabeledTree::node(labels[i].clone(), children)
    }
    build(0, &parents, &labels)
}

fn distance_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let a: Vec<u8> = (0..rng.gen_range(0..=8)).map(|_| rng.gen_range(0..4)).collect();
        let b: Vec<u8> = (0..rng.gen_range(0..=8)).map(|_| rng.gen_range(0..4)).collect();
        let (fast, slow) = (word_levenshtein(&a, &b), brute_levenshtein(&a, &b));
        ensure(fast == slow, || format!("levenshtein {a:?} {b:?}: {fast} vs {slow}"))?;
    }
    for _ in 0..100 {
        let (a, b) = (random_tree(&mut rng), random_tree(&mut rng));
        let fast = zhang_shasha(&a, &b);
        let slow = forest_distance(&[&a], &[&b], &mut HashMap::new());
        ensure(fast == slow, || format!("tree {a} vs {b}: {fast} vs {slow}"))?;
    }
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=8);
        let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let d = cosine_distance(&u, &v);
        ensure((0.0..=1.0).contains(&d), || format!("cosine {d}"))?;
    }
    Ok("200 levenshtein, 100 tree and 1000 cosine pairs".into())
}

fn binomial_tail(k: u64, n: u64, p: f64) -> f64 {
    let mut term = (1.0 - p).powi(n as i32);
    let mut total = 0.0;
    for j in 0..=n {
        if j >= k {
            total += term;
        }
        if j < n {
            term *= (n - j) as f64 / (j + 1) as f64 * p / (1.0 - p);
        }
    }
    total
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn statistical_oracles() -> Check {
    let total = 100u64;
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for n in 1..=50u64 {
        for k in 0..=n {
            for c in [k.max(1), k + 7, 50, 99] {
                if c < k || c > total || c == total {
                    continue;
                }
                let got = overrepresentation_test(k, n, c, total).map_err(|e| e.to_string())?;
                let want = if k == 0 { 1.0 } else { binomial_tail(k, n, c as f64 / total as f64) };
                worst = worst.max((got - want).abs());
                ensure((got - want).abs() < 1e-9, || format!("({k}, {n}, {c}, {total}): {got} vs {want}"))?;
                cases += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut gap: f64 = 0.0;
    for i in 0..20 {
        let g = 2 + i % 2;
        let d = 1 + i % 3;
        let shift = [0.0, 0.4, 0.8, 1.2][i % 4];
        let groups: Vec<Vec<Vec<f64>>> = (0..g)
            .map(|gi| {
                (0..10)
                    .map(|_| (0..d).map(|j| gaussian(&mut rng) + if j == 0 { shift * gi as f64 } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        let f = manova_pillai(&groups).map_err(|e| e.to_string())?;
        let perm = manova_permutation_test(&groups, 20_000, i as u64).map_err(|e| e.to_string())?;
        gap = gap.max((f.p_value - perm.p_value).abs());
        ensure((f.p_value - perm.p_value).abs() <= 0.03, || {
            format!("instance {i}: F approximation {} vs permutation {}", f.p_value, perm.p_value)
        })?;
    }
    let same: Vec<Vec<f64>> = (0..6).map(|_| vec![gaussian(&mut rng), gaussian(&mut rng)]).collect();
    let p = manova_pillai(&[same.clone(), same]).map_err(|e| e.to_string())?.p_value;
    ensure(p == 1.0, || format!("identical groups give p = {p}"))?;
    Ok(format!(
        "{cases} binomial cases (max error {worst:.1e}), 20 MANOVA instances (max gap {gap:.3}), identical groups p = 1"
    ))
}

fn heuristic_grid() -> Check {
    for si in 0..=20 {
        for ti in 1..=10 {
            let (sigma, tau) = (si as f64 / 20.0, ti as f64 / 10.0);
            let h = heuristic(sigma, tau);
            ensure((0.0..=1.0).contains(&h), || format!("h({sigma}, {tau}) = {h}"))?;
            ensure((h == 0.0) == (sigma >= tau), || format!("h({sigma}, {tau}) = {h}"))?;
        }
    }
    Ok("21 x 10 grid".into())
}

fn budget(s: &Synthetic) -> Check {
    let mut runs = s.records.len();
    let mut over = s.records.iter().filter(|r| r.result.ec_used > BUDGET).count();
    if let Some((_, variants)) = &s.ablation {
        for records in variants {
            runs += records.len();
            over += records.iter().filter(|r| r.result.ec_used > BUDGET).count();
        }
    }
    ensure(over == 0, || format!("{over} of {runs} runs over budget"))?;
    let zero = RunSettings::new(
        SearchConfig {
            budget: 0,
            ..SearchConfig::default()
        },
        "levenshtein",
    );
    let job = &s.jobs[0];
    let r = harness::run_job(&s.engine, &zero, job).map_err(|e| e.to_string())?;
    ensure(r.result.source == Source::Default && r.result.ec_used == 0, || {
        format!("budget 0 gave source {:?} with {} EC", r.result.source, r.result.ec_used)
    })?;
    Ok(format!("{runs} runs within {BUDGET} EC; budget 0 returns the default with 0 EC"))
}

fn focused() -> Check {
    let engine = synthetic_engine(5000, 1);
    let text = "the food arrived at the hotel . the plot was dreadful . we came to the city .";
    let x = engine.tokenize(text);
    ensure(x.sentence_count() == 3, || format!("{} sentences", x.sentence_count()))?;
    let pos = engine.label_index("pos").expect("pos");
    let predicted = engine.classifier().predict(&x).unwrap();
    ensure(predicted != pos, || "the text is already classified pos".into())?;
    let theta: Vec<f64> = (0..3)
        .map(|s| sentence_importance(engine.classifier(), &x, s, pos).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let best = (0..3).max_by(|&a, &b| theta[a].total_cmp(&theta[b])).expect("three sentences");
    ensure(best == 1 && theta[1] > theta[0] && theta[1] > theta[2], || format!("theta {theta:?}"))?;
    let settings = RunSettings::new(SearchConfig::default(), "levenshtein");
    let job = Job {
        example: None,
        text: text.into(),
        predicted,
        target: pos,
    };
    let r = harness::run_job(&engine, &settings, &job).map_err(|e| e.to_string())?;
    ensure(r.result.source == Source::Search, || format!("source {:?}", r.result.source))?;
    let cf = engine.tokenize(r.result.counterfactual.as_deref().expect("counterfactual"));
    let (lo, hi) = x.sentence_bounds[1];
    let first = &r.result.edit_trace[0];
    ensure((lo..hi).contains(&first.position), || format!("edit at {} outside {lo}..{hi}", first.position))?;
    ensure(
        cf.sentence_count() == 3
            && cf.sentence_tokens(0) == x.sentence_tokens(0)
            && cf.sentence_tokens(2) == x.sentence_tokens(2)
            && cf.sentence_tokens(1) != x.sentence_tokens(1),
        || format!("`{}` changes more than sentence 2", cf.raw),
    )?;
    let theta: Vec<String> = theta.iter().map(|t| format!("{t:.3}")).collect();
    Ok(format!("theta [{}], `{}`", theta.join(", "), cf.raw))
}

fn report(id: u8, name: &str, f: impl FnOnce() -> Check, failed: &mut Vec<u8>) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => println!("criterion {id:>2} {name}: PASS ({detail})"),
        Err(detail) => {
            println!("criterion {id:>2} {name}: FAIL ({detail})");
            failed.push(id);
        }
    }
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    let mut synthetic = Synthetic::run();
    report(1, "validity", || validity(&synthetic), &mut failed);
    report(2, "anytime monotonicity", || anytime(&synthetic), &mut failed);
    report(3, "plausibility ceiling", || plausibility(&synthetic), &mut failed);
    report(4, "best -> worst substitution", table_one, &mut failed);
    report(5, "ablation direction", || ablation(&mut synthetic), &mut failed);
    report(6, "distance oracles", distance_oracles, &mut failed);
    report(7, "statistical-test oracles", statistical_oracles, &mut failed);
    report(8, "heuristic grid", heuristic_grid, &mut failed);
    report(9, "expensive-call budget", || budget(&synthetic), &mut failed);
    report(10, "focused-search gating", focused, &mut failed);
    let sources: BTreeMap<String, usize> = harness::aggregate(&synthetic.records, "levenshtein").sources;
    println!("synthetic batch sources: {sources:?}");
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
