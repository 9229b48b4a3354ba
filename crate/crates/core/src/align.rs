//! Optimal-matching distance by dynamic programming, and full pairwise matrices.
//!
//! The distance is the cheapest sequence of substitutions and indels turning
//! one sequence into the other. Indel costs come from the scheme; for
//! localized schemes each element's cost is fixed by its neighbours in its own
//! sequence, so costs are computed once per position and the recurrence
//! stays `O(|x| * |y|)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::cost::CostScheme;
use crate::matrix::{condensed_len, DissimilarityMatrix, MatrixError};
use crate::seq::{distinct_sequences, DistinctSequences, SequenceDataset};

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("event index {event} is outside the scheme alphabet of size {size}")]
    EventOutsideAlphabet { event: usize, size: usize },
    #[error("case `{case_id}`: event index {event} is outside the scheme alphabet of size {size}")]
    CaseOutsideAlphabet { case_id: String, event: usize, size: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Optional length normalization of distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    /// Divide by the longer sequence length.
    MaxLen,
}

impl Normalization {
    #[inline]
    fn apply(self, d: f64, lx: usize, ly: usize) -> f64 {
        match self {
            Normalization::None => d,
            Normalization::MaxLen => d / lx.max(ly) as f64,
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Normalization::None),
            "maxlen" => Ok(Normalization::MaxLen),
            other => Err(format!("unknown normalization `{other}` (expected none or maxlen)")),
        }
    }
}

fn check_alphabet(seq: &[usize], scheme: &CostScheme) -> Result<(), AlignError> {
    let size = scheme.alphabet_size();
    match seq.iter().find(|&&e| e >= size) {
        Some(&event) => Err(AlignError::EventOutsideAlphabet { event, size }),
        None => Ok(()),
    }
}

/// Optimal-matching distance between two event-index sequences.
pub fn om_distance(x: &[usize], y: &[usize], scheme: &CostScheme) -> Result<f64, AlignError> {
    check_alphabet(x, scheme)?;
    check_alphabet(y, scheme)?;
    let del = scheme.position_indel_costs(x);
    let ins = scheme.position_indel_costs(y);
    Ok(align_prepared(x, &del, y, &ins, scheme))
}

/// Core recurrence. `del[i]` is the cost of removing `x[i]`, `ins[j]` of inserting `y[j]`.
fn align_prepared(x: &[usize], del: &[f64], y: &[usize], ins: &[f64], scheme: &CostScheme) -> f64 {
    let sub = scheme.substitution();
    let mut prev = Vec::with_capacity(y.len() + 1);
    prev.push(0.0);
    for j in 0..y.len() {
        prev.push(prev[j] + ins[j]);
    }
    let mut cur = vec![0.0; y.len() + 1];
    for (i, &xi) in x.iter().enumerate() {
        cur[0] = prev[0] + del[i];
        for (j, &yj) in y.iter().enumerate() {
            let mut best = prev[j] + sub.get(xi, yj);
            let deletion = prev[j + 1] + del[i];
            if deletion < best {
                best = deletion;
            }
            let insertion = cur[j] + ins[j];
            if insertion < best {
                best = insertion;
            }
            cur[j + 1] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[y.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatrixOptions {
    /// Align each distinct sequence pair once and expand to cases.
    pub dedupe: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub normalize: Normalization,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        Self {
            dedupe: true,
            threads: None,
            normalize: Normalization::None,
        }
    }
}

/// Pairwise distances over plain event lists, condensed lower triangle.
///
/// Each row of the triangle is a disjoint output slice, so the result does not
/// depend on how rows are scheduled across threads.
pub fn condensed_distances(
    seqs: &[Vec<usize>],
    scheme: &CostScheme,
    normalize: Normalization,
    threads: Option<usize>,
) -> Result<Vec<f64>, AlignError> {
    for s in seqs {
        check_alphabet(s, scheme)?;
    }
    let indel: Vec<Vec<f64>> = seqs.iter().map(|s| scheme.position_indel_costs(s)).collect();
    let mut values = vec![0.0; condensed_len(seqs.len())];
    let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(seqs.len());
    let mut rest = values.as_mut_slice();
    for i in 1..seqs.len() {
        let (row, tail) = rest.split_at_mut(i);
        rows.push((i, row));
        rest = tail;
    }
    let fill = move || {
        rows.into_par_iter().for_each(|(i, row)| {
            let (x, dx) = (&seqs[i], &indel[i]);
            for (j, slot) in row.iter_mut().enumerate() {
                let d = align_prepared(x, dx, &seqs[j], &indel[j], scheme);
                *slot = normalize.apply(d, x.len(), seqs[j].len());
            }
        })
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| AlignError::ThreadPool(e.to_string()))?
            .install(fill),
        None => fill(),
    }
    Ok(values)
}

/// Full case-by-case dissimilarity matrix of a dataset under `scheme`.
pub fn pairwise_matrix(
    ds: &SequenceDataset,
    scheme: &CostScheme,
    options: MatrixOptions,
) -> Result<DissimilarityMatrix, AlignError> {
    if ds.is_empty() {
        return Err(AlignError::Empty);
    }
    let size = scheme.alphabet_size();
    for seq in ds.sequences() {
        if let Some(&event) = seq.events.iter().find(|&&e| e >= size) {
            return Err(AlignError::CaseOutsideAlphabet {
                case_id: seq.case_id.clone(),
                event,
                size,
            });
        }
    }
    if options.dedupe {
        let (unique, distinct) = distinct_matrix(ds, scheme, options)?;
        return expand_distinct(&unique, &distinct, ds);
    }
    let seqs: Vec<Vec<usize>> = ds.sequences().iter().map(|s| s.events.clone()).collect();
    let values = condensed_distances(&seqs, scheme, options.normalize, options.threads)?;
    Ok(DissimilarityMatrix::new(ds.case_ids(), ds.weights(), values, scheme.describe())?)
}

/// Case-level matrix from a matrix over the distinct sequences of `ds`.
pub fn expand_distinct(
    unique: &DissimilarityMatrix,
    distinct: &DistinctSequences,
    ds: &SequenceDataset,
) -> Result<DissimilarityMatrix, AlignError> {
    let map = &distinct.case_to_unique;
    let n = ds.len();
    let mut values = Vec::with_capacity(condensed_len(n));
    for i in 1..n {
        for j in 0..i {
            values.push(unique.get(map[i], map[j]));
        }
    }
    Ok(DissimilarityMatrix::new(ds.case_ids(), ds.weights(), values, unique.scheme_name())?)
}

/// Matrix over the distinct sequences of `ds`, weighted by aggregated case weight.
/// Labels are the case ids of the first case holding each sequence.
pub fn distinct_matrix(
    ds: &SequenceDataset,
    scheme: &CostScheme,
    options: MatrixOptions,
) -> Result<(DissimilarityMatrix, DistinctSequences), AlignError> {
    let distinct = distinct_sequences(ds).map_err(|_| AlignError::Empty)?;
    let values = condensed_distances(&distinct.sequences, scheme, options.normalize, options.threads)?;
    let labels = distinct
        .first_case
        .iter()
        .map(|&c| ds.sequences()[c].case_id.clone())
        .collect();
    let m = DissimilarityMatrix::new(labels, distinct.weights.clone(), values, scheme.describe())?;
    Ok((m, distinct))
}
