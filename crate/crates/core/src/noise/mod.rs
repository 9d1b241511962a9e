//! Noise injection for robustness runs, and a synthetic labeled corpus.
//!
//! Lexify rewrites a request without changing the endpoint it invokes.
//! Interfere adds unlabeled background requests (assets, health checks,
//! analytics beacons). Both are deterministic given a seed.

pub mod corpus;
pub mod interfere;
pub mod lexify;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Dataset, HttpRecord};
use crate::seed;

pub use corpus::{synth_corpus, CorpusSpec, IdStyle};
pub use interfere::{interfere_sample, InterfereCategory};
pub use lexify::{lexify, LexifyOutcome, LexifyRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Lexify,
    Interfere,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Lexify => "lexify",
            NoiseKind::Interfere => "interfere",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lexify" => Ok(NoiseKind::Lexify),
            "interfere" => Ok(NoiseKind::Interfere),
            _ => Err(Error::Config(format!("unknown noise kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseRule {
    Lexify(LexifyRule),
    Interfere(InterfereCategory),
}

impl NoiseRule {
    pub fn name(self) -> &'static str {
        match self {
            NoiseRule::Lexify(r) => r.name(),
            NoiseRule::Interfere(c) => c.name(),
        }
    }

    pub fn kind(self) -> NoiseKind {
        match self {
            NoiseRule::Lexify(_) => NoiseKind::Lexify,
            NoiseRule::Interfere(_) => NoiseKind::Interfere,
        }
    }
}

/// All 23 rules: the Lexify rules followed by the Interfere categories.
pub fn registry() -> Vec<NoiseRule> {
    LexifyRule::ALL
        .iter()
        .map(|&r| NoiseRule::Lexify(r))
        .chain(InterfereCategory::ALL.iter().map(|&c| NoiseRule::Interfere(c)))
        .collect()
}

/// Number of records touched (Lexify) or added (Interfere): `round(ratio·N)`.
pub fn noise_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

/// Apply one kind of noise at `ratio` of the dataset size.
///
/// Lexify rewrites `round(ratio·N)` records sampled without replacement,
/// each with one rule drawn uniformly from those applicable to it. Interfere
/// adds `round(ratio·N)` unlabeled records with fresh ids, spread over
/// seeded positions while originals keep their relative order.
pub fn inject(dataset: &Dataset, kind: NoiseKind, ratio: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!("noise ratio {ratio} outside [0, 1]")));
    }
    let n = dataset.len();
    let m = noise_count(n, ratio);
    if m == 0 {
        return Ok(dataset.clone());
    }
    let records = match kind {
        NoiseKind::Lexify => {
            let mut rng = seed::rng(seed, "lexify");
            let mut chosen = sample(&mut rng, n, m).into_vec();
            chosen.sort_unstable();
            let mut records = dataset.records.clone();
            for i in chosen {
                let applicable: Vec<LexifyRule> = LexifyRule::ALL
                    .iter()
                    .copied()
                    .filter(|r| r.applies_to(&records[i]))
                    .collect();
                if applicable.is_empty() {
                    continue;
                }
                let rule = applicable[rng.random_range(0..applicable.len())];
                records[i] = lexify(&records[i], rule, &mut rng).record;
            }
            records
        }
        NoiseKind::Interfere => {
            let mut rng = seed::rng(seed, "interfere");
            let mut next_id = dataset.next_id();
            let mut added: Vec<HttpRecord> = (0..m)
                .map(|_| {
                    let cat = InterfereCategory::ALL[rng.random_range(0..InterfereCategory::ALL.len())];
                    let mut r = interfere_sample(cat, &mut rng);
                    r.id = next_id;
                    next_id += 1;
                    r
                })
                .collect();
            let mut slots = sample(&mut rng, n + m, m).into_vec();
            slots.sort_unstable();
            let mut originals = dataset.records.iter().cloned();
            let mut noise = added.drain(..);
            let mut slot_iter = slots.into_iter().peekable();
            let mut out = Vec::with_capacity(n + m);
            for pos in 0..n + m {
                if slot_iter.peek() == Some(&pos) {
                    slot_iter.next();
                    out.extend(noise.next());
                } else {
                    out.extend(originals.next());
                }
            }
            out
        }
    };
    Ok(Dataset::new(dataset.source.clone(), records))
}
