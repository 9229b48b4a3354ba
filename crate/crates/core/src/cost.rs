//! Substitution-cost matrices and indel models for optimal matching.
//!
//! Five named measures are supported:
//!
//! | measure | substitution            | indel                         |
//! |---------|-------------------------|-------------------------------|
//! | OMlev   | constant 2              | constant 1                    |
//! | OMtr    | transition-rate based   | constant 1                    |
//! | OMsf    | shared-future based     | constant 1                    |
//! | LOMtr   | transition-rate based   | localized, parameters `e, g`  |
//! | LOMsf   | shared-future based     | localized, parameters `e, g`  |
//!
//! A localized indel of element `u` between neighbours `a` and `b` costs
//! `e * gamma_max + g * (gamma(a, u) + gamma(b, u)) / 2`, and the parameters
//! must satisfy `2e + g >= 1`. A missing neighbour (sequence boundary)
//! contributes `gamma_max` in place of its substitution cost.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::fmt17;
use crate::seq::{EventAlphabet, SequenceDataset};

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("costs must be positive and finite (got substitution {sub}, indel {indel})")]
    NonPositiveCost { sub: f64, indel: f64 },
    #[error("2e + g ≥ 1 violated: e = {e}, g = {g} gives 2e + g = {}", 2.0 * e + g)]
    LocalizedConstraint { e: f64, g: f64 },
    #[error("localized indel parameters must be finite and non-negative (e = {e}, g = {g})")]
    LocalizedRange { e: f64, g: f64 },
    #[error("measure {0} needs both e and g")]
    MissingLocalizedParameters(Measure),
    #[error("lag must be at least 1")]
    InvalidLag,
    #[error("dataset is empty")]
    Empty,
    #[error("unknown measure `{0}` (expected OMlev, OMtr, OMsf, LOMtr, LOMsf or custom)")]
    UnknownMeasure(String),
    #[error("unknown transition denominator `{0}` (expected `successor` or `all`)")]
    UnknownDenominator(String),
    #[error("invalid cost scheme: {0}")]
    Invalid(String),
    #[error("substitution matrix file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Measure {
    #[serde(rename = "OMlev")]
    OmLev,
    #[serde(rename = "OMtr")]
    OmTr,
    #[serde(rename = "OMsf")]
    OmSf,
    #[serde(rename = "LOMtr")]
    LomTr,
    #[serde(rename = "LOMsf")]
    LomSf,
    #[serde(rename = "custom")]
    Custom,
}

impl Measure {
    pub const PRESETS: [Measure; 5] = [
        Measure::OmLev,
        Measure::OmTr,
        Measure::OmSf,
        Measure::LomTr,
        Measure::LomSf,
    ];

    pub fn is_localized(self) -> bool {
        matches!(self, Measure::LomTr | Measure::LomSf)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::OmLev => "OMlev",
            Measure::OmTr => "OMtr",
            Measure::OmSf => "OMsf",
            Measure::LomTr => "LOMtr",
            Measure::LomSf => "LOMsf",
            Measure::Custom => "custom",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OMlev" => Ok(Measure::OmLev),
            "OMtr" => Ok(Measure::OmTr),
            "OMsf" => Ok(Measure::OmSf),
            "LOMtr" => Ok(Measure::LomTr),
            "LOMsf" => Ok(Measure::LomSf),
            "custom" => Ok(Measure::Custom),
            other => Err(CostError::UnknownMeasure(other.to_string())),
        }
    }
}

/// Which occurrences of an antecedent count towards the transition-rate denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Denominator {
    /// Only occurrences that have an element `lag` positions later.
    #[default]
    Successor,
    /// Every occurrence, including terminal ones.
    All,
}

impl FromStr for Denominator {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "successor" => Ok(Denominator::Successor),
            "all" => Ok(Denominator::All),
            other => Err(CostError::UnknownDenominator(other.to_string())),
        }
    }
}

/// Lag-`q` transition rates `p(b | a)`, rows indexed by antecedent.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    lag: usize,
    rates: Vec<f64>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rates[from * self.size..(from + 1) * self.size]
    }
}

/// Counts lag-`q` transitions.
///
/// `p(a -> b) = n(a b) / n(a)` where `n(a b)` counts `a` at position `p` and
/// `b` at `p + lag` in the same sequence. With [`Denominator::Successor`],
/// `n(a)` only counts positions that have such a successor, so observed rows
/// are probability vectors. When `weighted` is set every occurrence counts
/// with its case weight.
pub fn transition_rates(
    ds: &SequenceDataset,
    lag: usize,
    weighted: bool,
    denominator: Denominator,
) -> Result<TransitionMatrix, CostError> {
    if lag == 0 {
        return Err(CostError::InvalidLag);
    }
    if ds.is_empty() {
        return Err(CostError::Empty);
    }
    let size = ds.alphabet().len();
    let mut pairs = vec![0.0; size * size];
    let mut with_successor = vec![0.0; size];
    let mut all = vec![0.0; size];
    for seq in ds.sequences() {
        let w = if weighted { seq.weight } else { 1.0 };
        for (p, &a) in seq.events.iter().enumerate() {
            all[a] += w;
            if let Some(&b) = seq.events.get(p + lag) {
                pairs[a * size + b] += w;
                with_successor[a] += w;
            }
        }
    }
    if with_successor.iter().all(|&n| n == 0.0) {
        log::warn!("no event pairs at lag {lag}; transition matrix is all zero");
    }
    let counts = match denominator {
        Denominator::Successor => &with_successor,
        Denominator::All => &all,
    };
    let mut rates = pairs;
    for (a, row) in rates.chunks_mut(size.max(1)).enumerate().take(size) {
        let n = counts[a];
        for r in row.iter_mut() {
            *r = if n > 0.0 { *r / n } else { 0.0 };
        }
    }
    Ok(TransitionMatrix { size, lag, rates })
}

/// Symmetric substitution costs, row-major `size x size`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionMatrix {
    size: usize,
    costs: Vec<f64>,
    gamma_max: f64,
}

impl SubstitutionMatrix {
    /// Wraps raw values without checking them; see [`validate_cost_scheme`].
    ///
    /// Panics if `costs.len() != size * size`.
    pub fn from_raw(size: usize, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), size * size, "substitution matrix shape");
        let gamma_max = off_diagonal_max(size, &costs);
        Self {
            size,
            costs,
            gamma_max,
        }
    }

    /// `cost` off the diagonal, zero on it.
    pub fn constant(size: usize, cost: f64) -> Self {
        Self::from_upper(size, |_, _| cost)
    }

    /// `2 - p(a b) - p(b a)` off the diagonal, zero on it.
    pub fn trate(tm: &TransitionMatrix) -> Self {
        Self::from_upper(tm.size, |a, b| 2.0 - tm.rate(a, b) - tm.rate(b, a))
    }

    /// Squared difference of two elements' lag-`q` future distributions, each
    /// future element weighted by the inverse of its column total. Columns with
    /// a zero total are skipped. With `normalize_max2` the off-diagonal is
    /// rescaled so that its maximum is 2 (left as is when all zero).
    pub fn shared_future(tm: &TransitionMatrix, normalize_max2: bool) -> Self {
        let n = tm.size;
        let column_totals: Vec<f64> = (0..n).map(|c| (0..n).map(|f| tm.rate(f, c)).sum()).collect();
        let raw = Self::from_upper(n, |a, b| {
            (0..n)
                .filter(|&c| column_totals[c] > 0.0)
                .map(|c| {
                    let diff = tm.rate(a, c) - tm.rate(b, c);
                    diff * diff / column_totals[c]
                })
                .sum()
        });
        if normalize_max2 && raw.gamma_max > 0.0 {
            let scale = 2.0 / raw.gamma_max;
            Self::from_upper(n, |a, b| raw.get(a, b) * scale)
        } else {
            raw
        }
    }

    /// Fills `a < b` with `f(a, b)` and mirrors it, so symmetry is exact.
    fn from_upper(size: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut costs = vec![0.0; size * size];
        for a in 0..size {
            for b in a + 1..size {
                let v = f(a, b);
                costs[a * size + b] = v;
                costs[b * size + a] = v;
            }
        }
        Self::from_raw(size, costs)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.costs[a * self.size + b]
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn values(&self) -> &[f64] {
        &self.costs
    }
}

fn off_diagonal_max(size: usize, costs: &[f64]) -> f64 {
    let mut max = 0.0f64;
    for a in 0..size {
        for b in 0..size {
            if a != b {
                max = max.max(costs[a * size + b]);
            }
        }
    }
    max
}

/// Dataset-driven shared-future substitution costs at lag `lag`.
pub fn shared_future_substitution(
    ds: &SequenceDataset,
    lag: usize,
    weighted: bool,
    normalize_max2: bool,
    denominator: Denominator,
) -> Result<SubstitutionMatrix, CostError> {
    let tm = transition_rates(ds, lag, weighted, denominator)?;
    Ok(SubstitutionMatrix::shared_future(&tm, normalize_max2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IndelModel {
    Constant { cost: f64 },
    Localized { e: f64, g: f64 },
}

impl IndelModel {
    pub fn constant(cost: f64) -> Result<Self, CostError> {
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(CostError::NonPositiveCost { sub: f64::NAN, indel: cost });
        }
        Ok(IndelModel::Constant { cost })
    }

    pub fn localized(e: f64, g: f64) -> Result<Self, CostError> {
        if !(e >= 0.0 && g >= 0.0 && e.is_finite() && g.is_finite()) {
            return Err(CostError::LocalizedRange { e, g });
        }
        if !localized_constraint_holds(e, g) {
            return Err(CostError::LocalizedConstraint { e, g });
        }
        Ok(IndelModel::Localized { e, g })
    }
}

/// `2e + g >= 1`, evaluated as `(2 * e) + g` in double precision.
pub fn localized_constraint_holds(e: f64, g: f64) -> bool {
    2.0 * e + g >= 1.0
}

/// Knobs shared by the data-driven presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostOptions {
    pub lag: usize,
    pub weighted: bool,
    pub denominator: Denominator,
    pub normalize_max2: bool,
    pub e: Option<f64>,
    pub g: Option<f64>,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self {
            lag: 1,
            weighted: true,
            denominator: Denominator::Successor,
            normalize_max2: true,
            e: None,
            g: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostScheme {
    measure: Measure,
    substitution: SubstitutionMatrix,
    indel: IndelModel,
    options: CostOptions,
}

impl CostScheme {
    /// Assembles a scheme and rejects it if [`validate_cost_scheme`] fails.
    pub fn new(
        measure: Measure,
        substitution: SubstitutionMatrix,
        indel: IndelModel,
        options: CostOptions,
    ) -> Result<Self, CostError> {
        let scheme = Self::new_unchecked(measure, substitution, indel, options);
        let report = validate_cost_scheme(&scheme);
        if !report.passed() {
            return Err(CostError::Invalid(report.violations.join("; ")));
        }
        Ok(scheme)
    }

    pub fn new_unchecked(
        measure: Measure,
        substitution: SubstitutionMatrix,
        indel: IndelModel,
        options: CostOptions,
    ) -> Self {
        Self {
            measure,
            substitution,
            indel,
            options,
        }
    }

    /// Builds one of the five named measures from the dataset it will be applied to.
    pub fn preset(measure: Measure, ds: &SequenceDataset, options: CostOptions) -> Result<Self, CostError> {
        let size = ds.alphabet().len();
        let substitution = match measure {
            Measure::OmLev => SubstitutionMatrix::constant(size, 2.0),
            Measure::OmTr | Measure::LomTr => {
                SubstitutionMatrix::trate(&transition_rates(ds, options.lag, options.weighted, options.denominator)?)
            }
            Measure::OmSf | Measure::LomSf => shared_future_substitution(
                ds,
                options.lag,
                options.weighted,
                options.normalize_max2,
                options.denominator,
            )?,
            Measure::Custom => {
                return Err(CostError::Invalid(
                    "custom schemes need an explicit substitution matrix".into(),
                ))
            }
        };
        let indel = Self::preset_indel(measure, &options)?;
        Self::new(measure, substitution, indel, options)
    }

    fn preset_indel(measure: Measure, options: &CostOptions) -> Result<IndelModel, CostError> {
        if measure.is_localized() {
            match (options.e, options.g) {
                (Some(e), Some(g)) => IndelModel::localized(e, g),
                _ => Err(CostError::MissingLocalizedParameters(measure)),
            }
        } else {
            IndelModel::constant(1.0)
        }
    }

    /// Same substitution costs with a different indel model (used by parameter sweeps).
    pub fn with_indel(&self, indel: IndelModel) -> Result<Self, CostError> {
        let mut options = self.options;
        if let IndelModel::Localized { e, g } = indel {
            options.e = Some(e);
            options.g = Some(g);
        }
        Self::new(self.measure, self.substitution.clone(), indel, options)
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn substitution(&self) -> &SubstitutionMatrix {
        &self.substitution
    }

    pub fn indel(&self) -> IndelModel {
        self.indel
    }

    pub fn options(&self) -> &CostOptions {
        &self.options
    }

    pub fn alphabet_size(&self) -> usize {
        self.substitution.size
    }

    /// A short provenance string such as `LOMtr(q=1,e=0.1,g=0.8)`.
    pub fn describe(&self) -> String {
        match self.indel {
            IndelModel::Constant { cost } => match self.measure {
                Measure::OmLev => "OMlev".to_string(),
                Measure::Custom => format!("custom(indel={cost})"),
                m => format!("{m}(q={})", self.options.lag),
            },
            IndelModel::Localized { e, g } => format!("{}(q={},e={e},g={g})", self.measure, self.options.lag),
        }
    }

    /// Cost of inserting or deleting `u` whose neighbours are `left` and
    /// `right` (`None` at a sequence boundary).
    #[inline]
    pub fn indel_cost(&self, u: usize, left: Option<usize>, right: Option<usize>) -> f64 {
        match self.indel {
            IndelModel::Constant { cost } => cost,
            IndelModel::Localized { e, g } => {
                let gamma_max = self.substitution.gamma_max;
                let side = |n: Option<usize>| n.map_or(gamma_max, |n| self.substitution.get(n, u));
                e * gamma_max + g * (side(left) + side(right)) / 2.0
            }
        }
    }

    /// Indel cost of each element of `seq`, using its neighbours within `seq`.
    pub fn position_indel_costs(&self, seq: &[usize]) -> Vec<f64> {
        (0..seq.len())
            .map(|i| {
                let left = i.checked_sub(1).map(|p| seq[p]);
                let right = seq.get(i + 1).copied();
                self.indel_cost(seq[i], left, right)
            })
            .collect()
    }
}

/// Constant substitution and indel costs; `(2, 1)` is the OMlev preset.
pub fn constant_costs(alphabet_size: usize, sub_cost: f64, indel_cost: f64) -> Result<CostScheme, CostError> {
    let valid = |c: f64| c > 0.0 && c.is_finite();
    if !valid(sub_cost) || !valid(indel_cost) {
        return Err(CostError::NonPositiveCost {
            sub: sub_cost,
            indel: indel_cost,
        });
    }
    let measure = if sub_cost == 2.0 && indel_cost == 1.0 {
        Measure::OmLev
    } else {
        Measure::Custom
    };
    CostScheme::new(
        measure,
        SubstitutionMatrix::constant(alphabet_size, sub_cost),
        IndelModel::Constant { cost: indel_cost },
        CostOptions::default(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_cost_scheme(scheme: &CostScheme) -> ValidationReport {
    let mut violations = Vec::new();
    let sub = &scheme.substitution;
    let n = sub.size;
    'outer: for a in 0..n {
        for b in a + 1..n {
            if sub.get(a, b) != sub.get(b, a) {
                violations.push(format!("asymmetric: cost({a},{b}) = {} but cost({b},{a}) = {}", sub.get(a, b), sub.get(b, a)));
                break 'outer;
            }
        }
    }
    if let Some(a) = (0..n).find(|&a| sub.get(a, a) != 0.0) {
        violations.push(format!("non-zero diagonal: cost({a},{a}) = {}", sub.get(a, a)));
    }
    if let Some(v) = sub.costs.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        violations.push(format!("negative or non-finite cost {v}"));
    }
    if sub.gamma_max != off_diagonal_max(n, &sub.costs) {
        violations.push(format!("gamma_max {} is not the off-diagonal maximum", sub.gamma_max));
    }
    match scheme.indel {
        IndelModel::Constant { cost } => {
            if !(cost > 0.0 && cost.is_finite()) {
                violations.push(format!("constant indel cost must be positive (got {cost})"));
            }
        }
        IndelModel::Localized { e, g } => {
            if !(e >= 0.0 && g >= 0.0) {
                violations.push(format!("e and g must be non-negative (e = {e}, g = {g})"));
            }
            if !localized_constraint_holds(e, g) {
                violations.push(format!("2e + g ≥ 1 violated (2e + g = {})", 2.0 * e + g));
            }
        }
    }
    ValidationReport { violations }
}

/// Writes the matrix as CSV with a header row and column of codes.
pub fn write_substitution_csv<W: Write>(
    sub: &SubstitutionMatrix,
    alphabet: &EventAlphabet,
    writer: W,
) -> Result<(), CostError> {
    if alphabet.len() != sub.size {
        return Err(CostError::Format(format!(
            "alphabet has {} codes but matrix is {}x{}",
            alphabet.len(),
            sub.size,
            sub.size
        )));
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![String::new()];
    header.extend(alphabet.codes().iter().cloned());
    wtr.write_record(&header)?;
    for a in 0..sub.size {
        let mut row = vec![alphabet.code(a).to_string()];
        row.extend((0..sub.size).map(|b| fmt17(sub.get(a, b))));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_substitution_csv<R: Read>(reader: R) -> Result<(EventAlphabet, SubstitutionMatrix), CostError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| CostError::Format("empty file".into()))??;
    let alphabet = EventAlphabet::from_codes(header.iter().skip(1).map(str::to_string));
    let n = alphabet.len();
    if n + 1 != header.len() {
        return Err(CostError::Format("duplicate codes in header".into()));
    }
    let mut costs = Vec::with_capacity(n * n);
    for (a, record) in records.enumerate() {
        let record = record?;
        if a >= n || record.len() != n + 1 || record.get(0) != Some(alphabet.code(a)) {
            return Err(CostError::Format(format!("row {} does not match the header", a + 1)));
        }
        for cell in record.iter().skip(1) {
            costs.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| CostError::Format(format!("bad number `{cell}`")))?,
            );
        }
    }
    if costs.len() != n * n {
        return Err(CostError::Format(format!("expected {n} rows")));
    }
    Ok((alphabet, SubstitutionMatrix::from_raw(n, costs)))
}

pub fn save_substitution_csv(
    sub: &SubstitutionMatrix,
    alphabet: &EventAlphabet,
    path: &Path,
) -> Result<(), CostError> {
    let file = std::fs::File::create(path)?;
    write_substitution_csv(sub, alphabet, std::io::BufWriter::new(file))
}
