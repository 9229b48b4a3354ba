//! Weighted k-medoids (PAM) clustering and cluster quality indices.
//!
//! Quality indices are computed with case weights `w_i` and pair weights
//! `w_i * w_j`:
//!
//! * `asw_w` – weight-averaged silhouette; `a_i` is the weighted mean distance
//!   to the other members of the own cluster, `b_i` the smallest weighted mean
//!   distance to another cluster. Singletons score 0.
//! * `pbc` – weighted Pearson correlation between pair distance and the
//!   "different clusters" indicator.
//! * `hg` – Goodman–Kruskal gamma between pair distance and the same
//!   indicator: `(concordant - discordant) / (concordant + discordant)`.
//! * `hc` – `(S - S_min) / (S_max - S_min)`, with `S` the weighted sum of
//!   within-cluster distances and `S_min`/`S_max` the sums of the smallest and
//!   largest distances carrying the same total pair weight.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::matrix::DissimilarityMatrix;
use crate::seq::SequenceDataset;

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("k = {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("case weights sum to zero")]
    ZeroTotalWeight,
    #[error("cluster {0} has zero total weight")]
    ZeroWeightCluster(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("quality indices need at least 2 cases and 2 clusters (n = {n}, k = {k})")]
    TooSmall { n: usize, k: usize },
    #[error("assignment covers {found} cases but the matrix has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label {label} is not below k = {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("unknown initialization `{0}` (expected build or random)")]
    UnknownInit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Greedy PAM BUILD, deterministic.
    #[default]
    Build,
    /// `k` distinct medoids drawn from a stream seeded by `(seed, k)`.
    Random,
}

impl std::str::FromStr for Init {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "build" => Ok(Init::Build),
            "random" => Ok(Init::Random),
            other => Err(ClusterError::UnknownInit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Cluster of each case, in `0..k`.
    pub labels: Vec<usize>,
    /// Case index of each cluster's medoid, ascending.
    pub medoids: Vec<usize>,
    /// `sum_i w_i * d(i, medoid(label_i))`.
    pub objective: f64,
}

impl ClusterAssignment {
    /// Lifts an assignment computed on distinct sequences back to cases.
    /// Medoids become the first case holding the medoid sequence.
    pub fn expand(&self, case_to_unique: &[usize], first_case: &[usize]) -> ClusterAssignment {
        ClusterAssignment {
            k: self.k,
            labels: case_to_unique.iter().map(|&u| self.labels[u]).collect(),
            medoids: self.medoids.iter().map(|&m| first_case[m]).collect(),
            objective: self.objective,
        }
    }
}

/// PAM-style weighted k-medoids: initialization followed by best-improvement
/// swaps until no single medoid exchange lowers the weighted objective.
pub fn weighted_k_medoids(
    m: &DissimilarityMatrix,
    k: usize,
    seed: u64,
    init: Init,
) -> Result<ClusterAssignment, ClusterError> {
    let n = m.n();
    if k == 0 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    let w = m.weights();
    if !(w.iter().sum::<f64>() > 0.0) {
        return Err(ClusterError::ZeroTotalWeight);
    }
    let mut medoids = match init {
        Init::Build => build(m, k),
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            rand::seq::index::sample(&mut rng, n, k).into_vec()
        }
    };
    swap(m, &mut medoids);
    medoids.sort_unstable();
    Ok(assign(m, k, medoids))
}

fn build(m: &DissimilarityMatrix, k: usize) -> Vec<usize> {
    let n = m.n();
    let w = m.weights();
    let first = (0..n)
        .map(|j| (j, (0..n).map(|i| w[i] * m.get(i, j)).sum::<f64>()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0;
    let mut medoids = vec![first];
    let mut is_medoid = vec![false; n];
    is_medoid[first] = true;
    let mut nearest: Vec<f64> = (0..n).map(|i| m.get(i, first)).collect();
    while medoids.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for c in (0..n).filter(|&c| !is_medoid[c]) {
            let gain: f64 = (0..n).map(|i| w[i] * (nearest[i] - m.get(i, c)).max(0.0)).sum();
            if gain > best.1 {
                best = (c, gain);
            }
        }
        let c = best.0;
        medoids.push(c);
        is_medoid[c] = true;
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(m.get(i, c));
        }
    }
    medoids
}

/// Nearest and second-nearest medoid distances, and the position of the nearest.
fn nearest_two(m: &DissimilarityMatrix, medoids: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = m.n();
    let mut d1 = vec![f64::INFINITY; n];
    let mut d2 = vec![f64::INFINITY; n];
    let mut near = vec![0; n];
    for i in 0..n {
        for (pos, &med) in medoids.iter().enumerate() {
            let d = m.get(i, med);
            if d < d1[i] {
                d2[i] = d1[i];
                d1[i] = d;
                near[i] = pos;
            } else if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    (d1, d2, near)
}

fn swap(m: &DissimilarityMatrix, medoids: &mut [usize]) {
    let n = m.n();
    let w = m.weights();
    let mut is_medoid = vec![false; n];
    for &med in medoids.iter() {
        is_medoid[med] = true;
    }
    loop {
        let (d1, d2, near) = nearest_two(m, medoids);
        let objective: f64 = (0..n).map(|i| w[i] * d1[i]).sum();
        let mut best: Option<(usize, usize, f64)> = None;
        for pos in 0..medoids.len() {
            for h in (0..n).filter(|&h| !is_medoid[h]) {
                let mut delta = 0.0;
                for i in 0..n {
                    let dh = m.get(i, h);
                    let after = if near[i] == pos { d2[i].min(dh) } else { d1[i].min(dh) };
                    delta += w[i] * (after - d1[i]);
                }
                if delta < best.map_or(0.0, |b| b.2) {
                    best = Some((pos, h, delta));
                }
            }
        }
        match best {
            Some((pos, h, delta)) if delta < -1e-12 * objective => {
                is_medoid[medoids[pos]] = false;
                is_medoid[h] = true;
                medoids[pos] = h;
            }
            _ => break,
        }
    }
}

/// Labels each case with its nearest medoid (ties to the lower cluster index);
/// medoids always label themselves.
fn assign(m: &DissimilarityMatrix, k: usize, medoids: Vec<usize>) -> ClusterAssignment {
    let n = m.n();
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (c, &med) in medoids.iter().enumerate() {
                let d = m.get(i, med);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect();
    for (c, &med) in medoids.iter().enumerate() {
        labels[med] = c;
    }
    let objective = objective(m, &labels, &medoids);
    ClusterAssignment {
        k,
        labels,
        medoids,
        objective,
    }
}

/// Weighted distance of every case to its cluster medoid.
pub fn objective(m: &DissimilarityMatrix, labels: &[usize], medoids: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| m.weights()[i] * m.get(i, medoids[c]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityIndices {
    #[serde(rename = "aswW")]
    pub asw_w: f64,
    pub hg: f64,
    pub pbc: f64,
    pub hc: f64,
}

fn check_labels(m: &DissimilarityMatrix, labels: &[usize], k: usize) -> Result<Vec<f64>, ClusterError> {
    let n = m.n();
    if labels.len() != n {
        return Err(ClusterError::LengthMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let mut cluster_weight = vec![0.0; k];
    let mut members = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        if c >= k {
            return Err(ClusterError::LabelOutOfRange { label: c, k });
        }
        cluster_weight[c] += m.weights()[i];
        members[c] += 1;
    }
    if let Some(c) = members.iter().position(|&count| count == 0) {
        return Err(ClusterError::EmptyCluster(c));
    }
    if let Some(c) = cluster_weight.iter().position(|&w| !(w > 0.0)) {
        return Err(ClusterError::ZeroWeightCluster(c));
    }
    Ok(cluster_weight)
}

pub fn cluster_quality(m: &DissimilarityMatrix, a: &ClusterAssignment) -> Result<QualityIndices, ClusterError> {
    let n = m.n();
    if n < 2 || a.k < 2 {
        return Err(ClusterError::TooSmall { n, k: a.k });
    }
    let cluster_weight = check_labels(m, &a.labels, a.k)?;
    let labels = &a.labels;
    let w = m.weights();

    // silhouette
    let mut sums = vec![0.0; a.k];
    let mut asw_num = 0.0;
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let mut own_other_weight = 0.0;
        for j in (0..n).filter(|&j| j != i) {
            sums[labels[j]] += w[j] * m.get(i, j);
            if labels[j] == labels[i] {
                own_other_weight += w[j];
            }
        }
        if own_other_weight <= 0.0 {
            continue;
        }
        let own = labels[i];
        let a_i = sums[own] / own_other_weight;
        let b_i = (0..a.k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / cluster_weight[c])
            .fold(f64::INFINITY, f64::min);
        let scale = a_i.max(b_i);
        if scale > 0.0 {
            asw_num += w[i] * (b_i - a_i) / scale;
        }
    }
    let total: f64 = w.iter().sum();
    let asw_w = asw_num / total;

    let mut pairs: Vec<Pair> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        for j in 0..i {
            pairs.push(Pair {
                dist: m.get(i, j),
                weight: w[i] * w[j],
                between: labels[i] != labels[j],
            });
        }
    }
    let pbc = point_biserial(&pairs);
    pairs.sort_by(|p, q| p.dist.total_cmp(&q.dist));
    let hg = hubert_gamma(&pairs);
    let hc = hubert_c(&pairs);
    Ok(QualityIndices { asw_w, hg, pbc, hc })
}

struct Pair {
    dist: f64,
    weight: f64,
    between: bool,
}

fn point_biserial(pairs: &[Pair]) -> f64 {
    let total: f64 = pairs.iter().map(|p| p.weight).sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let mean_d = pairs.iter().map(|p| p.weight * p.dist).sum::<f64>() / total;
    let mean_b = pairs.iter().filter(|p| p.between).map(|p| p.weight).sum::<f64>() / total;
    let (mut cov, mut var_d, mut var_b) = (0.0, 0.0, 0.0);
    for p in pairs {
        let dd = p.dist - mean_d;
        let db = f64::from(u8::from(p.between)) - mean_b;
        cov += p.weight * dd * db;
        var_d += p.weight * dd * dd;
        var_b += p.weight * db * db;
    }
    if var_d > 0.0 && var_b > 0.0 {
        (cov / (var_d.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Expects `pairs` sorted by distance.
fn hubert_gamma(pairs: &[Pair]) -> f64 {
    let within_total: f64 = pairs.iter().filter(|p| !p.between).map(|p| p.weight).sum();
    let (mut concordant, mut discordant, mut within_below) = (0.0, 0.0, 0.0);
    for group in pairs.chunk_by(|p, q| p.dist == q.dist) {
        let within: f64 = group.iter().filter(|p| !p.between).map(|p| p.weight).sum();
        let between: f64 = group.iter().filter(|p| p.between).map(|p| p.weight).sum();
        concordant += between * within_below;
        discordant += between * (within_total - within_below - within).max(0.0);
        within_below += within;
    }
    let denom = concordant + discordant;
    if denom > 0.0 {
        ((concordant - discordant) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Expects `pairs` sorted by distance.
fn hubert_c(pairs: &[Pair]) -> f64 {
    let within_weight: f64 = pairs.iter().filter(|p| !p.between).map(|p| p.weight).sum();
    let s: f64 = pairs.iter().filter(|p| !p.between).map(|p| p.weight * p.dist).sum();
    let take = |iter: &mut dyn Iterator<Item = &Pair>| {
        let (mut left, mut sum) = (within_weight, 0.0);
        for p in iter {
            if left <= 0.0 {
                break;
            }
            let used = p.weight.min(left);
            sum += used * p.dist;
            left -= used;
        }
        sum
    };
    let s_min = take(&mut pairs.iter());
    let s_max = take(&mut pairs.iter().rev());
    let span = s_max - s_min;
    if span <= 1e-12 * s_max.abs() {
        0.0
    } else {
        ((s - s_min) / span).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityRow {
    pub k: usize,
    pub indices: QualityIndices,
    /// Each index standardized over the k range (sample standard deviation).
    pub standardized: QualityIndices,
    pub assignment: ClusterAssignment,
}

/// Clusters once per `k` and reports quality indices with standardized values.
pub fn quality_over_k(
    m: &DissimilarityMatrix,
    ks: &[usize],
    seed: u64,
    init: Init,
) -> Result<Vec<QualityRow>, ClusterError> {
    let n = m.n();
    if let Some(&k) = ks.iter().find(|&&k| k < 2 || k > n) {
        return Err(ClusterError::InvalidK { k, n });
    }
    let results: Vec<(usize, ClusterAssignment, QualityIndices)> = ks
        .par_iter()
        .map(|&k| {
            let a = weighted_k_medoids(m, k, seed, init)?;
            let q = cluster_quality(m, &a)?;
            Ok((k, a, q))
        })
        .collect::<Result<_, ClusterError>>()?;
    let z = |get: fn(&QualityIndices) -> f64| standardize(&results.iter().map(|r| get(&r.2)).collect::<Vec<_>>());
    let asw = z(|q| q.asw_w);
    let hg = z(|q| q.hg);
    let pbc = z(|q| q.pbc);
    let hc = z(|q| q.hc);
    Ok(results
        .into_iter()
        .enumerate()
        .map(|(row, (k, assignment, indices))| QualityRow {
            k,
            indices,
            standardized: QualityIndices {
                asw_w: asw[row],
                hg: hg[row],
                pbc: pbc[row],
                hc: hc[row],
            },
            assignment,
        })
        .collect())
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd > 0.0 {
        values.iter().map(|v| (v - mean) / sd).collect()
    } else {
        vec![0.0; n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Representative {
    pub cluster: usize,
    /// First case holding the representative sequence.
    pub case_index: usize,
    pub events: Vec<usize>,
    pub weight: f64,
    /// Share of the cluster's total weight.
    pub share: f64,
}

/// For each cluster, the distinct sequence carrying the most weight.
/// Ties go to the sequence whose first case comes first.
pub fn representative_sequences(
    ds: &SequenceDataset,
    a: &ClusterAssignment,
) -> Result<Vec<Representative>, ClusterError> {
    if a.labels.len() != ds.len() {
        return Err(ClusterError::LengthMismatch {
            expected: ds.len(),
            found: a.labels.len(),
        });
    }
    let mut out = Vec::with_capacity(a.k);
    for cluster in 0..a.k {
        let mut groups: Vec<(usize, f64)> = Vec::new();
        let mut lookup: std::collections::HashMap<&[usize], usize> = std::collections::HashMap::new();
        let mut total = 0.0;
        for (case, seq) in ds.sequences().iter().enumerate() {
            if a.labels[case] != cluster {
                continue;
            }
            let g = *lookup.entry(seq.events.as_slice()).or_insert_with(|| {
                groups.push((case, 0.0));
                groups.len() - 1
            });
            groups[g].1 += seq.weight;
            total += seq.weight;
        }
        if groups.is_empty() {
            return Err(ClusterError::EmptyCluster(cluster));
        }
        if !(total > 0.0) {
            return Err(ClusterError::ZeroWeightCluster(cluster));
        }
        let (case_index, weight) = groups
            .iter()
            .copied()
            .reduce(|best, g| if g.1.partial_cmp(&best.1) == Some(Ordering::Greater) { g } else { best })
            .expect("non-empty");
        out.push(Representative {
            cluster,
            case_index,
            events: ds.sequences()[case_index].events.clone(),
            weight,
            share: weight / total,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pairs(within: f64, between: f64) -> DissimilarityMatrix {
        DissimilarityMatrix::unlabeled(4, |i, j| if i / 2 == j / 2 { within } else { between }).unwrap()
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let m = DissimilarityMatrix::unlabeled(5, |i, j| (i + j) as f64).unwrap();
        let a = weighted_k_medoids(&m, 5, 0, Init::Build).unwrap();
        assert_eq!(a.objective, 0.0);
        assert_eq!(a.medoids, vec![0, 1, 2, 3, 4]);
        assert_eq!(a.labels, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_tight_pairs() {
        let a = weighted_k_medoids(&two_pairs(1.0, 10.0), 2, 0, Init::Build).unwrap();
        assert_eq!(a.medoids, vec![0, 2]);
        assert_eq!(a.labels, vec![0, 0, 1, 1]);
        assert_eq!(a.objective, 2.0);
    }

    #[test]
    fn invalid_inputs() {
        let m = two_pairs(1.0, 10.0);
        assert!(matches!(weighted_k_medoids(&m, 5, 0, Init::Build), Err(ClusterError::InvalidK { .. })));
        assert!(matches!(weighted_k_medoids(&m, 0, 0, Init::Build), Err(ClusterError::InvalidK { .. })));
        let zero = m.with_weights(vec![0.0; 4]).unwrap();
        assert!(matches!(weighted_k_medoids(&zero, 2, 0, Init::Build), Err(ClusterError::ZeroTotalWeight)));
    }

    #[test]
    fn random_init_is_seeded() {
        let m = DissimilarityMatrix::unlabeled(12, |i, j| ((i * 7 + j * 3) % 11) as f64 + 1.0).unwrap();
        let a = weighted_k_medoids(&m, 3, 42, Init::Random).unwrap();
        let b = weighted_k_medoids(&m, 3, 42, Init::Random).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quality_of_two_tight_pairs() {
        let m = two_pairs(1.0, 10.0);
        let a = weighted_k_medoids(&m, 2, 0, Init::Build).unwrap();
        let q = cluster_quality(&m, &a).unwrap();
        assert!((q.asw_w - 0.9).abs() < 1e-15);
        assert_eq!(q.hg, 1.0);
        assert_eq!(q.hc, 0.0);
        assert!(q.pbc > 0.99);
    }

    #[test]
    fn quality_with_equal_distances() {
        let m = two_pairs(3.0, 3.0);
        let a = ClusterAssignment {
            k: 2,
            labels: vec![0, 0, 1, 1],
            medoids: vec![0, 2],
            objective: 6.0,
        };
        let q = cluster_quality(&m, &a).unwrap();
        assert_eq!(q, QualityIndices { asw_w: 0.0, hg: 0.0, pbc: 0.0, hc: 0.0 });
    }

    #[test]
    fn quality_rejects_degenerate_partitions() {
        let m = two_pairs(1.0, 10.0);
        let a = ClusterAssignment {
            k: 2,
            labels: vec![0, 0, 0, 0],
            medoids: vec![0, 2],
            objective: 0.0,
        };
        assert!(matches!(cluster_quality(&m, &a), Err(ClusterError::EmptyCluster(1))));
        let w = m.with_weights(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let a = ClusterAssignment { labels: vec![0, 0, 1, 1], ..a };
        assert!(matches!(cluster_quality(&w, &a), Err(ClusterError::ZeroWeightCluster(1))));
    }

    #[test]
    fn single_k_standardizes_to_zero() {
        let rows = quality_over_k(&two_pairs(1.0, 10.0), &[2], 0, Init::Build).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].standardized, QualityIndices { asw_w: 0.0, hg: 0.0, pbc: 0.0, hc: 0.0 });
    }

    #[test]
    fn representatives() {
        let ds = SequenceDataset::from_weighted_code_lists(
            &[vec!["A"], vec!["B"], vec!["A"], vec!["C"], vec!["C"]],
            &[2.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let a = ClusterAssignment {
            k: 2,
            labels: vec![0, 0, 0, 1, 1],
            medoids: vec![0, 3],
            objective: 0.0,
        };
        let reps = representative_sequences(&ds, &a).unwrap();
        assert_eq!(reps[0].case_index, 0);
        assert_eq!(reps[0].share, 0.75);
        assert_eq!(reps[1].share, 1.0);
    }

    #[test]
    fn representative_ties_go_to_first_case() {
        let ds = SequenceDataset::from_code_lists(&[vec!["B"], vec!["A"]]).unwrap();
        let a = ClusterAssignment {
            k: 1,
            labels: vec![0, 0],
            medoids: vec![0],
            objective: 0.0,
        };
        let reps = representative_sequences(&ds, &a).unwrap();
        assert_eq!(reps[0].case_index, 0);
        assert_eq!(reps[0].share, 0.5);
    }
}
