mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqom::align::{condensed_distances, om_distance, pairwise_matrix, MatrixOptions, Normalization};
use seqom::cost::{constant_costs, CostOptions, CostScheme, IndelModel, Measure};
use seqom::synth::{random_dataset, random_sequences};

fn schemes(alphabet: usize, seed: u64) -> Vec<CostScheme> {
    let ds = random_dataset(40, 1, 5, alphabet, seed);
    let lom = CostOptions {
        e: Some(0.15),
        g: Some(0.75),
        ..CostOptions::default()
    };
    vec![
        CostScheme::preset(Measure::OmLev, &ds, CostOptions::default()).unwrap(),
        CostScheme::preset(Measure::OmTr, &ds, CostOptions::default()).unwrap(),
        CostScheme::preset(Measure::OmSf, &ds, CostOptions::default()).unwrap(),
        CostScheme::preset(Measure::LomTr, &ds, lom).unwrap(),
        CostScheme::preset(Measure::LomSf, &ds, lom).unwrap(),
    ]
}

fn oracle_distance(x: &[usize], y: &[usize], scheme: &CostScheme) -> f64 {
    let sub = |a: usize, b: usize| scheme.substitution().get(a, b);
    let gamma_max = (0..scheme.alphabet_size())
        .flat_map(|a| (0..scheme.alphabet_size()).filter(move |&b| b != a).map(move |b| (a, b)))
        .map(|(a, b)| sub(a, b))
        .fold(0.0, f64::max);
    let (del, ins) = match scheme.indel() {
        IndelModel::Constant { cost } => (vec![cost; x.len()], vec![cost; y.len()]),
        IndelModel::Localized { e, g } => (
            oracles::localized_indels(x, &sub, gamma_max, e, g),
            oracles::localized_indels(y, &sub, gamma_max, e, g),
        ),
    };
    oracles::brute_force_om(x, y, &sub, &del, &ins)
}

#[test]
fn dp_matches_exhaustive_edit_scripts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..4 {
        let alphabet = 2 + round % 3;
        for scheme in schemes(alphabet, round as u64) {
            for _ in 0..300 {
                let x: Vec<usize> = (0..rng.random_range(0..=5)).map(|_| rng.random_range(0..alphabet)).collect();
                let y: Vec<usize> = (0..rng.random_range(0..=5)).map(|_| rng.random_range(0..alphabet)).collect();
                let d = om_distance(&x, &y, &scheme).unwrap();
                assert_eq!(d, oracle_distance(&x, &y, &scheme), "{} on {x:?} / {y:?}", scheme.describe());
            }
        }
    }
}

#[test]
fn triangle_inequality_for_levenshtein() {
    let lev = constant_costs(3, 2.0, 1.0).unwrap();
    let mut all: Vec<Vec<usize>> = vec![vec![]];
    for len in 1..=3u32 {
        for code in 0..3usize.pow(len) {
            all.push((0..len).map(|p| code / 3usize.pow(p) % 3).collect());
        }
    }
    let n = all.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = om_distance(&all[i], &all[j], &lev).unwrap();
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                assert!(d[a * n + c] <= d[a * n + b] + d[b * n + c]);
            }
        }
    }
}

#[test]
fn constant_cost_monotone_under_common_suffix() {
    let lev = constant_costs(3, 2.0, 1.0).unwrap();
    let seqs = random_sequences(60, 0, 4, 3, 5);
    for x in &seqs {
        for y in &seqs {
            let base = om_distance(x, y, &lev).unwrap();
            for e in 0..3 {
                let (mut xe, mut ye) = (x.clone(), y.clone());
                xe.push(e);
                ye.push(e);
                assert!(om_distance(&xe, &ye, &lev).unwrap() <= base);
            }
        }
    }
}

#[test]
fn matrix_identical_across_thread_counts() {
    let ds = random_dataset(120, 2, 9, 6, 3);
    let scheme = CostScheme::preset(
        Measure::LomTr,
        &ds,
        CostOptions {
            e: Some(0.2),
            g: Some(0.6),
            ..CostOptions::default()
        },
    )
    .unwrap();
    let base = pairwise_matrix(&ds, &scheme, MatrixOptions { threads: Some(1), ..MatrixOptions::default() }).unwrap();
    for t in [2, 3, 8] {
        let other = pairwise_matrix(&ds, &scheme, MatrixOptions { threads: Some(t), dedupe: false, ..MatrixOptions::default() }).unwrap();
        assert_eq!(base.values().len(), other.values().len());
        assert!(base.values().iter().zip(other.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn matrix_entries_agree_with_pairwise_calls() {
    let seqs = random_sequences(25, 1, 6, 4, 8);
    let scheme = &schemes(4, 8)[4];
    let v = condensed_distances(&seqs, scheme, Normalization::None, None).unwrap();
    let mut k = 0;
    for i in 1..seqs.len() {
        for j in 0..i {
            assert_eq!(v[k], om_distance(&seqs[i], &seqs[j], scheme).unwrap());
            k += 1;
        }
    }
}

fn seq_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..4, 0..8)
}

proptest! {
    #[test]
    fn symmetric_and_zero_on_self(x in seq_strategy(), y in seq_strategy(), which in 0usize..5, seed in 0u64..4) {
        let scheme = &schemes(4, seed)[which];
        let dxy = om_distance(&x, &y, scheme).unwrap();
        prop_assert_eq!(dxy, om_distance(&y, &x, scheme).unwrap());
        prop_assert_eq!(om_distance(&x, &x, scheme).unwrap(), 0.0);
        prop_assert!(dxy >= 0.0);
    }

    #[test]
    fn bounded_by_delete_all_insert_all(x in seq_strategy(), y in seq_strategy(), which in 0usize..3) {
        let scheme = &schemes(4, 1)[which];
        let d = om_distance(&x, &y, scheme).unwrap();
        prop_assert!(d <= (x.len() + y.len()) as f64);
    }
}
