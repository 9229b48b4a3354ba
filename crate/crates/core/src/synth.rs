//! Seeded synthetic data: planted-cluster sequence sets and random sequences.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::om_distance;
use crate::cost::constant_costs;
use crate::seq::{Attribute, EventAlphabet, EventSequence, SequenceDataset};

/// Code for alphabet index `i`: letters for small alphabets, `E00`-style otherwise.
pub fn code_name(i: usize, alphabet_size: usize) -> String {
    if alphabet_size <= 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("E{i:02}")
    }
}

fn alphabet_of(size: usize) -> EventAlphabet {
    EventAlphabet::from_codes((0..size).map(|i| code_name(i, size)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub templates: usize,
    pub template_len: usize,
    pub alphabet: usize,
    pub cases: usize,
    /// Per-position probability of replacing an event by a different one.
    pub substitution_rate: f64,
    /// One case in this many receives a single random insertion or deletion.
    pub indel_every: usize,
    /// Minimum Levenshtein-style OM distance (sub 2, indel 1) between templates.
    pub min_template_distance: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            templates: 3,
            template_len: 6,
            alphabet: 8,
            cases: 60,
            substitution_rate: 0.1,
            indel_every: 5,
            min_template_distance: 8.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    /// Cases with unit weights and a `truth` attribute holding the template index.
    pub dataset: SequenceDataset,
    pub truth: Vec<usize>,
    pub templates: Vec<Vec<usize>>,
}

/// Noisy copies of well-separated random templates. Case `i` copies template
/// `i % templates`.
pub fn planted_clusters(cfg: &PlantedConfig, seed: u64) -> Planted {
    assert!(cfg.alphabet >= 2 && cfg.template_len >= 1 && cfg.templates >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lev = constant_costs(cfg.alphabet, 2.0, 1.0).expect("positive costs");
    let mut templates: Vec<Vec<usize>> = Vec::with_capacity(cfg.templates);
    let mut attempts = 0;
    while templates.len() < cfg.templates {
        attempts += 1;
        let t: Vec<usize> = (0..cfg.template_len).map(|_| rng.random_range(0..cfg.alphabet)).collect();
        let far = templates
            .iter()
            .all(|o| om_distance(o, &t, &lev).expect("in alphabet") >= cfg.min_template_distance);
        if far || attempts > 10_000 {
            templates.push(t);
        }
    }

    let mut with_indel = vec![false; cfg.cases];
    if cfg.indel_every > 0 {
        let mut order: Vec<usize> = (0..cfg.cases).collect();
        order.shuffle(&mut rng);
        for &i in order.iter().take(cfg.cases / cfg.indel_every) {
            with_indel[i] = true;
        }
    }

    let mut sequences = Vec::with_capacity(cfg.cases);
    let mut truth = Vec::with_capacity(cfg.cases);
    for (i, &indel) in with_indel.iter().enumerate() {
        let label = i % cfg.templates;
        let mut events: Vec<usize> = templates[label]
            .iter()
            .map(|&e| {
                if rng.random_bool(cfg.substitution_rate) {
                    (e + rng.random_range(1..cfg.alphabet)) % cfg.alphabet
                } else {
                    e
                }
            })
            .collect();
        if indel {
            if events.len() > 1 && rng.random_bool(0.5) {
                let at = rng.random_range(0..events.len());
                events.remove(at);
            } else {
                let at = rng.random_range(0..=events.len());
                events.insert(at, rng.random_range(0..cfg.alphabet));
            }
        }
        sequences.push(EventSequence {
            case_id: format!("s{:03}", i + 1),
            weight: 1.0,
            events,
        });
        truth.push(label);
    }
    let attr = Attribute {
        name: "truth".to_string(),
        values: truth.iter().map(|t| format!("T{}", t + 1)).collect(),
    };
    let dataset = SequenceDataset::new(alphabet_of(cfg.alphabet), sequences, vec![attr]).expect("valid synthetic dataset");
    Planted { dataset, truth, templates }
}

/// Uniform random sequences with lengths in `min_len..=max_len`.
pub fn random_sequences(n: usize, min_len: usize, max_len: usize, alphabet: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(min_len..=max_len);
            (0..len).map(|_| rng.random_range(0..alphabet)).collect()
        })
        .collect()
}

/// Unit-weight dataset of [`random_sequences`] with ids `r1, r2, ...`.
pub fn random_dataset(n: usize, min_len: usize, max_len: usize, alphabet: usize, seed: u64) -> SequenceDataset {
    let sequences = random_sequences(n, min_len.max(1), max_len.max(1), alphabet, seed)
        .into_iter()
        .enumerate()
        .map(|(i, events)| EventSequence {
            case_id: format!("r{}", i + 1),
            weight: 1.0,
            events,
        })
        .collect();
    SequenceDataset::new(alphabet_of(alphabet), sequences, Vec::new()).expect("valid random dataset")
}
