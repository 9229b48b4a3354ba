//! Agreement between two partitions (ARI, AMI, FMS) and the Mantel test
//! between two dissimilarity matrices.
//!
//! Pair counts are weighted: a group of cases with total weight `W` and
//! squared-weight sum `Q` holds `(W^2 - Q) / 2` pairs. With unit weights this
//! is the usual `W (W - 1) / 2`.
//!
//! `N11` counts pairs together in both partitions, `N10` pairs together only
//! in the second, `N01` pairs together only in the first, `N00` the rest.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::matrix::DissimilarityMatrix;

#[derive(Debug, thiserror::Error)]
pub enum AgreementError {
    #[error("label vectors differ in length ({x} vs {y}) or do not match {weights} weights")]
    LengthMismatch { x: usize, y: usize, weights: usize },
    #[error("weight {weight} at position {index} is negative or not finite")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("contingency table is empty (no case with positive weight)")]
    Empty,
    #[error("cell ({row}, {col}) holds non-integer count {count}; exact expected mutual information needs integer counts")]
    NonIntegerCount { row: usize, col: usize, count: f64 },
    #[error("matrices differ in size ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("matrices differ in case labels (first difference at position {0})")]
    LabelMismatch(usize),
    #[error("constant matrix: correlation is undefined")]
    ConstantMatrix,
    #[error("at least one permutation is required")]
    NoPermutations,
    #[error("unknown correlation `{0}` (expected pearson or spearman)")]
    UnknownCorrelation(String),
    #[error("unknown EMI mode `{0}` (expected exact or rounded)")]
    UnknownEmiMode(String),
}

/// Weighted cross-tabulation of two partitions. Rows follow the first
/// appearance of each label of `x`, columns of `y`, among positive-weight cases.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    counts: Vec<Vec<f64>>,
    cell_squares: Vec<Vec<f64>>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    row_squares: Vec<f64>,
    col_squares: Vec<f64>,
    total: f64,
    total_squares: f64,
    cases: usize,
}

impl ContingencyTable {
    pub fn rows(&self) -> usize {
        self.row_sums.len()
    }

    pub fn cols(&self) -> usize {
        self.col_sums.len()
    }

    pub fn count(&self, i: usize, j: usize) -> f64 {
        self.counts[i][j]
    }

    pub fn counts(&self) -> &[Vec<f64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of cases with positive weight.
    pub fn cases(&self) -> usize {
        self.cases
    }

    /// True when each row and each column has exactly one non-empty cell,
    /// i.e. the partitions agree up to relabeling.
    pub fn is_identical(&self) -> bool {
        let rows_ok = self.counts.iter().all(|row| row.iter().filter(|&&c| c > 0.0).count() == 1);
        let cols_ok = (0..self.cols()).all(|j| self.counts.iter().filter(|row| row[j] > 0.0).count() == 1);
        rows_ok && cols_ok
    }

    pub fn pair_counts(&self) -> PairCounts {
        let pairs = |sum: f64, sq: f64| ((sum * sum - sq) / 2.0).max(0.0);
        let n11: f64 = self
            .counts
            .iter()
            .zip(&self.cell_squares)
            .flat_map(|(row, sq)| row.iter().zip(sq).map(|(&c, &q)| pairs(c, q)))
            .sum();
        let same_x: f64 = self.row_sums.iter().zip(&self.row_squares).map(|(&s, &q)| pairs(s, q)).sum();
        let same_y: f64 = self.col_sums.iter().zip(&self.col_squares).map(|(&s, &q)| pairs(s, q)).sum();
        let total = pairs(self.total, self.total_squares);
        let n10 = (same_y - n11).max(0.0);
        let n01 = (same_x - n11).max(0.0);
        PairCounts {
            n11,
            n10,
            n01,
            n00: (total - n11 - n10 - n01).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCounts {
    pub n11: f64,
    pub n10: f64,
    pub n01: f64,
    pub n00: f64,
}

impl PairCounts {
    pub fn total(&self) -> f64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    /// Cohen's kappa on the 2x2 same-pair / different-pair table.
    pub fn kappa(&self) -> f64 {
        let t = self.total();
        let po = (self.n11 + self.n00) / t;
        let pe = ((self.n11 + self.n10) * (self.n11 + self.n01) + (self.n00 + self.n01) * (self.n00 + self.n10)) / (t * t);
        if 1.0 - pe == 0.0 {
            0.0
        } else {
            (po - pe) / (1.0 - pe)
        }
    }
}

pub fn contingency<A, B>(x: &[A], y: &[B], weights: &[f64]) -> Result<ContingencyTable, AgreementError>
where
    A: Hash + Eq,
    B: Hash + Eq,
{
    if x.len() != y.len() || x.len() != weights.len() {
        return Err(AgreementError::LengthMismatch {
            x: x.len(),
            y: y.len(),
            weights: weights.len(),
        });
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
        return Err(AgreementError::InvalidWeight { index, weight });
    }
    let mut row_of: HashMap<&A, usize> = HashMap::new();
    let mut col_of: HashMap<&B, usize> = HashMap::new();
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for ((a, b), &w) in x.iter().zip(y).zip(weights) {
        if w == 0.0 {
            continue;
        }
        let next = row_of.len();
        let i = *row_of.entry(a).or_insert(next);
        let next = col_of.len();
        let j = *col_of.entry(b).or_insert(next);
        cells.push((i, j, w));
    }
    if cells.is_empty() {
        return Err(AgreementError::Empty);
    }
    let (r, s) = (row_of.len(), col_of.len());
    let mut ct = ContingencyTable {
        counts: vec![vec![0.0; s]; r],
        cell_squares: vec![vec![0.0; s]; r],
        row_sums: vec![0.0; r],
        col_sums: vec![0.0; s],
        row_squares: vec![0.0; r],
        col_squares: vec![0.0; s],
        total: 0.0,
        total_squares: 0.0,
        cases: cells.len(),
    };
    for (i, j, w) in cells {
        let w2 = w * w;
        ct.counts[i][j] += w;
        ct.cell_squares[i][j] += w2;
        ct.row_sums[i] += w;
        ct.row_squares[i] += w2;
        ct.col_sums[j] += w;
        ct.col_squares[j] += w2;
        ct.total += w;
        ct.total_squares += w2;
    }
    Ok(ct)
}

/// Adjusted Rand index from weighted pair counts.
pub fn ari(ct: &ContingencyTable) -> f64 {
    if ct.is_identical() {
        return 1.0;
    }
    let p = ct.pair_counts();
    let denom = (p.n00 + p.n01) * (p.n01 + p.n11) + (p.n00 + p.n10) * (p.n10 + p.n11);
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * (p.n00 * p.n11 - p.n01 * p.n10) / denom
}

/// Fowlkes–Mallows score. No shared pairs gives 0.
pub fn fms(ct: &ContingencyTable) -> f64 {
    let p = ct.pair_counts();
    if p.n11 == 0.0 {
        return 0.0;
    }
    if ct.is_identical() {
        return 1.0;
    }
    ((p.n11 / (p.n11 + p.n10)) * (p.n11 / (p.n11 + p.n01))).sqrt().clamp(0.0, 1.0)
}

/// How non-integer (weighted) counts are handled by [`ami`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmiMode {
    /// Reject tables with non-integer cells.
    Exact,
    /// Round cells to the nearest integer (with a warning) and score the rounded table.
    #[default]
    Rounded,
}

impl std::str::FromStr for EmiMode {
    type Err = AgreementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(EmiMode::Exact),
            "rounded" => Ok(EmiMode::Rounded),
            other => Err(AgreementError::UnknownEmiMode(other.to_string())),
        }
    }
}

fn integer_table(ct: &ContingencyTable, mode: EmiMode) -> Result<Vec<Vec<u64>>, AgreementError> {
    let mut changed = false;
    let mut out = Vec::with_capacity(ct.rows());
    for (row, cells) in ct.counts.iter().enumerate() {
        let mut ints = Vec::with_capacity(cells.len());
        for (col, &count) in cells.iter().enumerate() {
            let rounded = count.round();
            if (count - rounded).abs() > 1e-9 * count.max(1.0) {
                if mode == EmiMode::Exact {
                    return Err(AgreementError::NonIntegerCount { row, col, count });
                }
                changed = true;
            }
            ints.push(rounded as u64);
        }
        out.push(ints);
    }
    if changed {
        log::warn!("weighted contingency counts rounded to integers for expected mutual information");
    }
    Ok(out)
}

/// Adjusted mutual information with the permutation-model expectation.
pub fn ami(ct: &ContingencyTable, mode: EmiMode) -> Result<f64, AgreementError> {
    if ct.is_identical() {
        return Ok(1.0);
    }
    let table = integer_table(ct, mode)?;
    let a: Vec<u64> = table.iter().map(|row| row.iter().sum()).collect();
    let b: Vec<u64> = (0..ct.cols()).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let n: u64 = a.iter().sum();
    if n == 0 {
        return Err(AgreementError::Empty);
    }
    let nf = n as f64;
    let entropy = |sums: &[u64]| -> f64 {
        sums.iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (nf * c / (a[i] as f64 * b[j] as f64)).ln();
            }
        }
    }
    let emi = expected_mutual_information(&a, &b, n);
    let denom = entropy(&a).max(entropy(&b)) - emi;
    if denom.abs() <= 1e-15 {
        return Ok(0.0);
    }
    Ok(((mi - emi) / denom).min(1.0))
}

/// Expected mutual information of two partitions with the given margins when
/// labels are assigned at random (hypergeometric cell model).
pub fn expected_mutual_information(a: &[u64], b: &[u64], n: u64) -> f64 {
    let lf = log_factorials(n as usize);
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in a.iter().filter(|&&v| v > 0) {
        for &bj in b.iter().filter(|&&v| v > 0) {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            let fixed = lf[ai as usize] + lf[bj as usize] + lf[(n - ai) as usize] + lf[(n - bj) as usize] - lf[n as usize];
            for nij in lo..=hi {
                let log_p = fixed
                    - lf[nij as usize]
                    - lf[(ai - nij) as usize]
                    - lf[(bj - nij) as usize]
                    - lf[(n + nij - ai - bj) as usize];
                let x = nij as f64;
                emi += x / nf * (nf * x / (ai as f64 * bj as f64)).ln() * log_p.exp();
            }
        }
    }
    emi
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut lf = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    lf.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        lf.push(acc);
    }
    lf
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub ari: f64,
    pub ami: f64,
    pub fms: f64,
    /// Cases with positive weight.
    pub n: usize,
    /// Categories in the first partition.
    pub r: usize,
    /// Categories in the second partition.
    pub s: usize,
}

pub fn agreement_report<A, B>(x: &[A], y: &[B], weights: &[f64], mode: EmiMode) -> Result<AgreementReport, AgreementError>
where
    A: Hash + Eq,
    B: Hash + Eq,
{
    let ct = contingency(x, y, weights)?;
    Ok(AgreementReport {
        ari: ari(&ct),
        ami: ami(&ct, mode)?,
        fms: fms(&ct),
        n: ct.cases(),
        r: ct.rows(),
        s: ct.cols(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    #[default]
    Pearson,
    /// Pearson on average ranks.
    Spearman,
}

impl std::str::FromStr for Correlation {
    type Err = AgreementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pearson" => Ok(Correlation::Pearson),
            "spearman" => Ok(Correlation::Spearman),
            other => Err(AgreementError::UnknownCorrelation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MantelResult {
    pub r: f64,
    pub permutations: usize,
    pub p_value: f64,
    pub seed: u64,
}

/// Average ranks (1-based) with ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn centered(values: &[f64]) -> Result<(Vec<f64>, f64), AgreementError> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum();
    if !(ss > 0.0) {
        return Err(AgreementError::ConstantMatrix);
    }
    Ok((c, ss))
}

/// Correlation of `x` with the triangle of `y` under the case permutation `perm`.
fn permuted_correlation(x: &[f64], sxx: f64, y: &[f64], syy: f64, perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut sxy = 0.0;
    let mut k = 0;
    for i in 1..n {
        let pi = perm[i];
        for &pj in &perm[..i] {
            let (hi, lo) = if pi > pj { (pi, pj) } else { (pj, pi) };
            sxy += x[k] * y[hi * (hi - 1) / 2 + lo];
            k += 1;
        }
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Mantel test: correlation between two matrices over the same cases, with a
/// two-sided permutation p-value. Permutation `b` uses its own stream of a
/// generator seeded by `seed`, so results do not depend on thread scheduling.
pub fn mantel_test(
    m1: &DissimilarityMatrix,
    m2: &DissimilarityMatrix,
    permutations: usize,
    seed: u64,
    method: Correlation,
) -> Result<MantelResult, AgreementError> {
    if m1.n() != m2.n() {
        return Err(AgreementError::DimensionMismatch(m1.n(), m2.n()));
    }
    if let Some(pos) = m1.labels().iter().zip(m2.labels()).position(|(a, b)| a != b) {
        return Err(AgreementError::LabelMismatch(pos));
    }
    if permutations == 0 {
        return Err(AgreementError::NoPermutations);
    }
    if m1.values().is_empty() {
        return Err(AgreementError::ConstantMatrix);
    }
    let (x, y) = match method {
        Correlation::Pearson => (m1.values().to_vec(), m2.values().to_vec()),
        Correlation::Spearman => (average_ranks(m1.values()), average_ranks(m2.values())),
    };
    let (x, sxx) = centered(&x)?;
    let (y, syy) = centered(&y)?;
    let n = m1.n();
    let identity: Vec<usize> = (0..n).collect();
    let r = permuted_correlation(&x, sxx, &y, syy, &identity);
    let threshold = r.abs() - 1e-12;
    let extreme = (0..permutations)
        .into_par_iter()
        .filter(|&b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut perm = identity.clone();
            perm.shuffle(&mut rng);
            permuted_correlation(&x, sxx, &y, syy, &perm).abs() >= threshold
        })
        .count();
    Ok(MantelResult {
        r,
        permutations,
        p_value: (1 + extreme) as f64 / (permutations + 1) as f64,
        seed,
    })
}
