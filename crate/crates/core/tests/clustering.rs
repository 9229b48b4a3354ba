mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqom::cluster::{cluster_quality, objective, representative_sequences, weighted_k_medoids, ClusterAssignment, Init};
use seqom::matrix::DissimilarityMatrix;
use seqom::seq::SequenceDataset;

fn random_matrix(n: usize, rng: &mut ChaCha8Rng, integer: bool) -> DissimilarityMatrix {
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    let labels = (0..n).map(|i| format!("x{i}")).collect();
    DissimilarityMatrix::from_fn(labels, weights, "test", |_, _| {
        if integer {
            f64::from(rng.random_range(1u32..6))
        } else {
            rng.random_range(0.0..10.0)
        }
    })
    .unwrap()
}

fn random_labels(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    loop {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        if (0..k).all(|c| labels.contains(&c)) {
            return labels;
        }
    }
}

fn assignment(labels: Vec<usize>, k: usize) -> ClusterAssignment {
    let medoids = (0..k).map(|c| labels.iter().position(|&l| l == c).unwrap()).collect();
    ClusterAssignment { k, labels, medoids, objective: 0.0 }
}

fn medoid_set_objective(m: &DissimilarityMatrix, medoids: &[usize]) -> f64 {
    (0..m.n())
        .map(|i| m.weights()[i] * medoids.iter().map(|&c| m.get(i, c)).fold(f64::INFINITY, f64::min))
        .sum()
}

#[test]
fn swap_reaches_global_optimum_almost_always() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 2000;
    let mut hits = 0;
    for t in 0..trials {
        let n = rng.random_range(4..=9);
        let k = rng.random_range(1..=3);
        let m = random_matrix(n, &mut rng, false);
        let init = if t % 2 == 0 { Init::Build } else { Init::Random };
        let a = weighted_k_medoids(&m, k, t as u64, init).unwrap();
        let best = oracles::best_medoid_objective(&|i, j| m.get(i, j), m.weights(), k);
        assert!(a.objective >= best - 1e-9 * best.abs().max(1.0), "found {} below optimum {best}", a.objective);
        // Misses must still be local optima: no single medoid swap improves the objective.
        for slot in 0..k {
            for h in (0..n).filter(|h| !a.medoids.contains(h)) {
                let mut meds = a.medoids.clone();
                meds[slot] = h;
                let swapped = medoid_set_objective(&m, &meds);
                assert!(swapped >= a.objective - 1e-9 * a.objective.max(1.0), "trial {t}: swap {slot}->{h} improves");
            }
        }
        if (a.objective - best).abs() <= 1e-9 * best.abs().max(1.0) {
            hits += 1;
        }
    }
    assert!(hits * 100 >= trials * 95, "{hits}/{trials}");
}

#[test]
fn assignment_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = rng.random_range(3..30);
        let k = rng.random_range(1..=n.min(6));
        let m = random_matrix(n, &mut rng, true);
        let a = weighted_k_medoids(&m, k, 1, Init::Build).unwrap();
        assert_eq!(a.medoids.len(), k);
        assert!(a.medoids.windows(2).all(|w| w[0] < w[1]));
        for (c, &med) in a.medoids.iter().enumerate() {
            assert_eq!(a.labels[med], c);
        }
        for i in 0..n {
            if a.medoids.contains(&i) {
                continue;
            }
            let best = (0..k).fold(0, |b, c| if m.get(i, a.medoids[c]) < m.get(i, a.medoids[b]) { c } else { b });
            assert_eq!(a.labels[i], best);
        }
        let direct = objective(&m, &a.labels, &a.medoids);
        assert!((a.objective - direct).abs() <= 1e-9 * direct.max(1.0));
    }
}

#[test]
fn quality_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for round in 0..60 {
        let n = rng.random_range(4..16);
        let k = rng.random_range(2..=n.min(4));
        let m = random_matrix(n, &mut rng, round % 2 == 0);
        let labels = random_labels(n, k, &mut rng);
        let d = |i: usize, j: usize| m.get(i, j);
        let q = cluster_quality(&m, &assignment(labels.clone(), k)).unwrap();
        assert!((q.asw_w - oracles::asw_oracle(&d, m.weights(), &labels, k)).abs() < 1e-9);
        assert!((q.hg - oracles::hg_oracle(&d, m.weights(), &labels)).abs() < 1e-9);
        assert!((q.pbc - oracles::pbc_oracle(&d, m.weights(), &labels)).abs() < 1e-9);

        let unit = m.with_weights(vec![1.0; n]).unwrap();
        let q = cluster_quality(&unit, &assignment(labels.clone(), k)).unwrap();
        assert!((q.hc - oracles::hc_unit_oracle(&d, n, &labels)).abs() < 1e-9);
        for v in [q.asw_w, q.hg, q.pbc] {
            assert!((-1.0..=1.0).contains(&v));
        }
        assert!((0.0..=1.0).contains(&q.hc));
    }
}

#[test]
fn representative_shares_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lists: Vec<Vec<&str>> = (0..40).map(|_| (0..rng.random_range(1..3)).map(|_| ["A", "B"][rng.random_range(0..2)]).collect()).collect();
    let weights: Vec<f64> = (0..40).map(|_| rng.random_range(0.5..2.0)).collect();
    let ds = SequenceDataset::from_weighted_code_lists(&lists, &weights).unwrap();
    let a = assignment(random_labels(40, 3, &mut rng), 3);
    let reps = representative_sequences(&ds, &a).unwrap();
    for rep in &reps {
        let members: Vec<usize> = (0..40).filter(|&i| a.labels[i] == rep.cluster).collect();
        let total: f64 = members.iter().map(|&i| weights[i]).sum();
        let mut shares = 0.0;
        let mut seen: Vec<&Vec<usize>> = Vec::new();
        for &i in &members {
            let events = &ds.sequences()[i].events;
            if seen.contains(&events) {
                continue;
            }
            seen.push(events);
            let w: f64 = members.iter().filter(|&&j| &ds.sequences()[j].events == events).map(|&j| weights[j]).sum();
            assert!(w <= rep.weight + 1e-12);
            shares += w / total;
        }
        assert!((shares - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariant_to_weight_and_distance_scaling(seed in 0u64..10_000, cw in 0.1f64..10.0, cd in 0.1f64..10.0, k in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let m = random_matrix(n, &mut rng, false);
        let scaled_w = m.with_weights(m.weights().iter().map(|w| w * cw).collect()).unwrap();
        let scaled_d = DissimilarityMatrix::from_fn(m.labels().to_vec(), m.weights().to_vec(), "s", |i, j| m.get(i, j) * cd).unwrap();
        let a = weighted_k_medoids(&m, k, 0, Init::Build).unwrap();
        let q = cluster_quality(&m, &a).unwrap();
        for (other, obj_scale) in [(&scaled_w, cw), (&scaled_d, cd)] {
            let b = weighted_k_medoids(other, k, 0, Init::Build).unwrap();
            prop_assert_eq!(&a.labels, &b.labels);
            prop_assert_eq!(&a.medoids, &b.medoids);
            prop_assert!((b.objective - a.objective * obj_scale).abs() <= 1e-9 * b.objective);
            let qb = cluster_quality(other, &b).unwrap();
            prop_assert!((q.asw_w - qb.asw_w).abs() < 1e-12);
            prop_assert!((q.hg - qb.hg).abs() < 1e-12);
            prop_assert!((q.pbc - qb.pbc).abs() < 1e-12);
            prop_assert!((q.hc - qb.hc).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_to_cluster_relabeling(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 10;
        let m = random_matrix(n, &mut rng, true);
        let labels = random_labels(n, 3, &mut rng);
        let a = assignment(labels.clone(), 3);
        let perm = [2usize, 0, 1];
        let relabeled = ClusterAssignment {
            k: 3,
            labels: labels.iter().map(|&l| perm[l]).collect(),
            medoids: (0..3).map(|c| a.medoids[perm.iter().position(|&p| p == c).unwrap()]).collect(),
            objective: 0.0,
        };
        prop_assert_eq!(cluster_quality(&m, &a).unwrap(), cluster_quality(&m, &relabeled).unwrap());
        prop_assert_eq!(objective(&m, &a.labels, &a.medoids), objective(&m, &relabeled.labels, &relabeled.medoids));
    }
}
