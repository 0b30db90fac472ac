//! A two-class dataset where one planted adjective decides the class.
//!
//! Every text is a neutral template with exactly one slot filled by a word
//! from the class's planted list; all other words are drawn from the same
//! pools for both classes. The matching vector table places each class's
//! planted words around its own centre so that the adjective clusters differ
//! while every other word is noise.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tce_core::models::WordVectors;
use tce_core::Corpus;

pub const POSITIVE: &[&str] = &[
    "superb", "brilliant", "delightful", "wonderful", "fantastic", "marvelous", "splendid", "terrific",
];
pub const NEGATIVE: &[&str] = &[
    "dreadful", "tedious", "mediocre", "atrocious", "horrendous", "shoddy", "lousy", "bland",
];

const NOUNS: &[&str] = &[
    "food", "service", "movie", "plot", "music", "room", "staff", "menu", "show", "story", "book", "game",
    "hotel", "meal", "table", "car", "city", "day", "team", "screen",
];
const VERBS: &[&str] = &["arrived", "came", "stayed", "started", "ended", "returned", "began", "visited", "played", "ordered"];
const ADPOSITIONS: &[&str] = &["in", "on", "at", "after", "before", "with", "near", "during"];

const TEMPLATES: &[&str] = &[
    "the {n} {v} {a} the {n} and it was {p} .",
    "the {n} was {p} {a} the {n} .",
    "we {v} {a} the {n} , the {n} was {p} .",
    "{p} {n} {a} the {n} .",
    "the {n} {v} {a} the {n} , a {p} {n} .",
];

pub const VECTOR_DIM: usize = 6;

fn fill(template: &str, planted: &str, rng: &mut ChaCha8Rng) -> String {
    template
        .split(' ')
        .map(|slot| match slot {
            "{n}" => *NOUNS.choose(rng).expect("nouns"),
            "{v}" => *VERBS.choose(rng).expect("verbs"),
            "{a}" => *ADPOSITIONS.choose(rng).expect("adpositions"),
            "{p}" => planted,
            w => w,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// `n` texts, half `pos` and half `neg` (the first label is `pos`), in a
/// seeded random order.
pub fn planted_dataset(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items: Vec<(String, &str)> = (0..n)
        .map(|i| {
            let (label, words) = if i % 2 == 0 { ("pos", POSITIVE) } else { ("neg", NEGATIVE) };
            let template = TEMPLATES.choose(&mut rng).expect("templates");
            let planted = words.choose(&mut rng).expect("planted words");
            (fill(template, planted, &mut rng), label)
        })
        .collect();
    items[1..].shuffle(&mut rng);
    Corpus::from_pairs(items).expect("a planted dataset has two labels")
}

/// Word vectors for the planted vocabulary: unit Gaussian noise, shifted by
/// `±2` on the first axis for positive and negative planted words.
pub fn planted_vectors(seed: u64) -> WordVectors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_7ec5);
    let words = NOUNS
        .iter()
        .chain(VERBS)
        .chain(ADPOSITIONS)
        .chain(POSITIVE)
        .chain(NEGATIVE)
        .chain(&["the", "a", "and", "it", "was", "we"]);
    let mut table = BTreeMap::new();
    for w in words {
        let mut v: Vec<f64> = (0..VECTOR_DIM).map(|_| gaussian(&mut rng)).collect();
        if POSITIVE.contains(w) {
            v[0] += 2.0;
        } else if NEGATIVE.contains(w) {
            v[0] -= 2.0;
        }
        table.insert(w.to_string(), v);
    }
    WordVectors::new(VECTOR_DIM, table).expect("fixed dimension")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
