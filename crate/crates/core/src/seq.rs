//! Weighted event-sequence datasets: loading, encoding and summaries.
//!
//! Two CSV layouts are understood. The long layout stores each sequence as a
//! `;`-separated list in an `events` column. The wide layout spreads events over
//! `pcrash1..pcrash3` followed by `soe1..soeK`, where trailing empty cells mean
//! "no further events". Any other column is kept verbatim as a case attribute
//! (for instance a benchmark categorization).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

/// Errors raised while reading, validating or transforming datasets.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: case `{case_id}` has no events")]
    EmptySequence { line: u64, case_id: String },
    #[error("line {line}: negative weight {weight} for case `{case_id}`")]
    NegativeWeight {
        line: u64,
        case_id: String,
        weight: f64,
    },
    #[error("line {line}: duplicate case_id `{case_id}`")]
    DuplicateCase { line: u64, case_id: String },
    #[error("event code `{code}` (first seen in case `{case_id}`) is not covered by scheme `{scheme}`")]
    UnmappedCode {
        code: String,
        case_id: String,
        scheme: String,
    },
    #[error("encoding scheme line {line}: {message}")]
    Scheme { line: u64, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("unknown dataset format `{0}` (expected `long` or `wide`)")]
    UnknownFormat(String),
}

/// On-disk dataset layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Long,
    Wide,
}

impl FromStr for Format {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "long" => Ok(Format::Long),
            "wide" => Ok(Format::Wide),
            other => Err(DataError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Long => "long",
            Format::Wide => "wide",
        })
    }
}

/// Ordered set of event codes. Codes keep first-insertion order so that
/// derived matrices do not depend on hash iteration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventAlphabet {
    codes: Vec<String>,
    index: HashMap<String, usize>,
}

impl EventAlphabet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an alphabet from codes in the given order, skipping repeats.
    pub fn from_codes<I, S>(codes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut alphabet = Self::new();
        for code in codes {
            alphabet.intern(&code.into());
        }
        alphabet
    }

    /// Returns the position of `code`, inserting it at the end if unseen.
    pub fn intern(&mut self, code: &str) -> usize {
        if let Some(&i) = self.index.get(code) {
            return i;
        }
        let i = self.codes.len();
        self.codes.push(code.to_string());
        self.index.insert(code.to_string(), i);
        i
    }

    pub fn get(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn code(&self, index: usize) -> &str {
        &self.codes[index]
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// One case: an ordered list of alphabet indices with a sampling weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    pub case_id: String,
    pub weight: f64,
    pub events: Vec<usize>,
}

impl EventSequence {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// A non-sequence column carried along with the cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    alphabet: EventAlphabet,
    sequences: Vec<EventSequence>,
    total_weight: f64,
    attributes: Vec<Attribute>,
}

impl SequenceDataset {
    /// Builds a dataset from pre-indexed sequences, validating every invariant.
    pub fn new(
        alphabet: EventAlphabet,
        sequences: Vec<EventSequence>,
        attributes: Vec<Attribute>,
    ) -> Result<Self, DataError> {
        let mut seen = HashMap::with_capacity(sequences.len());
        for (row, seq) in sequences.iter().enumerate() {
            let line = row as u64 + 1;
            if seq.events.is_empty() {
                return Err(DataError::EmptySequence {
                    line,
                    case_id: seq.case_id.clone(),
                });
            }
            if !(seq.weight >= 0.0) || !seq.weight.is_finite() {
                return Err(DataError::NegativeWeight {
                    line,
                    case_id: seq.case_id.clone(),
                    weight: seq.weight,
                });
            }
            if let Some(&bad) = seq.events.iter().find(|&&e| e >= alphabet.len()) {
                return Err(DataError::Malformed {
                    line,
                    message: format!("event index {bad} outside alphabet of size {}", alphabet.len()),
                });
            }
            if seen.insert(seq.case_id.as_str(), ()).is_some() {
                return Err(DataError::DuplicateCase {
                    line,
                    case_id: seq.case_id.clone(),
                });
            }
        }
        for attr in &attributes {
            if attr.values.len() != sequences.len() {
                return Err(DataError::Malformed {
                    line: 0,
                    message: format!(
                        "attribute `{}` has {} values for {} cases",
                        attr.name,
                        attr.values.len(),
                        sequences.len()
                    ),
                });
            }
        }
        let total_weight = sequences.iter().map(|s| s.weight).sum();
        Ok(Self {
            alphabet,
            sequences,
            total_weight,
            attributes,
        })
    }

    /// Convenience constructor from code lists with unit weights and ids `c1, c2, ...`.
    pub fn from_code_lists<S: AsRef<str>>(lists: &[Vec<S>]) -> Result<Self, DataError> {
        let weights = vec![1.0; lists.len()];
        Self::from_weighted_code_lists(lists, &weights)
    }

    pub fn from_weighted_code_lists<S: AsRef<str>>(
        lists: &[Vec<S>],
        weights: &[f64],
    ) -> Result<Self, DataError> {
        let mut alphabet = EventAlphabet::new();
        let sequences = lists
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(i, (codes, &weight))| EventSequence {
                case_id: format!("c{}", i + 1),
                weight,
                events: codes.iter().map(|c| alphabet.intern(c.as_ref())).collect(),
            })
            .collect();
        Self::new(alphabet, sequences, Vec::new())
    }

    pub fn alphabet(&self) -> &EventAlphabet {
        &self.alphabet
    }

    pub fn sequences(&self) -> &[EventSequence] {
        &self.sequences
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&[String]> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.values.as_slice())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.sequences.iter().map(|s| s.weight).collect()
    }

    pub fn case_ids(&self) -> Vec<String> {
        self.sequences.iter().map(|s| s.case_id.clone()).collect()
    }

    /// Event codes of sequence `i`.
    pub fn codes_of(&self, i: usize) -> Vec<&str> {
        self.sequences[i]
            .events
            .iter()
            .map(|&e| self.alphabet.code(e))
            .collect()
    }
}

pub fn load_dataset(path: &Path, format: Format) -> Result<SequenceDataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(file, format)
}

enum EventColumns {
    Long(usize),
    Wide(Vec<usize>),
}

pub fn read_dataset<R: Read>(reader: R, format: Format) -> Result<SequenceDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);

    let case_col = column("case_id").ok_or_else(|| DataError::MissingColumn("case_id".into()))?;
    let weight_col = column("weight");
    let events = match format {
        Format::Long => {
            EventColumns::Long(column("events").ok_or_else(|| DataError::MissingColumn("events".into()))?)
        }
        Format::Wide => {
            let mut cols: Vec<((u8, u32), usize)> = headers
                .iter()
                .enumerate()
                .filter_map(|(i, h)| wide_event_rank(h).map(|rank| (rank, i)))
                .collect();
            if cols.is_empty() {
                return Err(DataError::MissingColumn("pcrash1".into()));
            }
            cols.sort();
            EventColumns::Wide(cols.into_iter().map(|(_, i)| i).collect())
        }
    };
    let is_event_col = |i: usize| match &events {
        EventColumns::Long(c) => *c == i,
        EventColumns::Wide(cs) => cs.contains(&i),
    };
    let attr_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != case_col && Some(i) != weight_col && !is_event_col(i))
        .collect();

    let mut alphabet = EventAlphabet::new();
    let mut sequences = Vec::new();
    let mut attributes: Vec<Attribute> = attr_cols
        .iter()
        .map(|&i| Attribute {
            name: headers[i].to_string(),
            values: Vec::new(),
        })
        .collect();
    let mut seen: HashMap<String, ()> = HashMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |i: usize| record.get(i).unwrap_or("");

        let case_id = cell(case_col).to_string();
        if case_id.is_empty() {
            return Err(DataError::Malformed {
                line,
                message: "empty case_id".into(),
            });
        }
        let weight = match weight_col {
            None => 1.0,
            Some(c) => {
                let raw = cell(c);
                let w: f64 = raw.parse().map_err(|_| DataError::Malformed {
                    line,
                    message: format!("cannot parse weight `{raw}`"),
                })?;
                if !w.is_finite() {
                    return Err(DataError::Malformed {
                        line,
                        message: format!("non-finite weight `{raw}`"),
                    });
                }
                if w < 0.0 {
                    return Err(DataError::NegativeWeight { line, case_id, weight: w });
                }
                w
            }
        };

        let codes: Vec<&str> = match &events {
            EventColumns::Long(c) => {
                let raw = cell(*c);
                if raw.is_empty() {
                    Vec::new()
                } else {
                    let parts: Vec<&str> = raw.split(';').map(str::trim).collect();
                    if parts.iter().any(|p| p.is_empty()) {
                        return Err(DataError::Malformed {
                            line,
                            message: format!("empty event code in `{raw}`"),
                        });
                    }
                    parts
                }
            }
            EventColumns::Wide(cols) => {
                let cells: Vec<&str> = cols.iter().map(|&c| cell(c)).collect();
                let used = cells.iter().rposition(|c| !c.is_empty()).map_or(0, |p| p + 1);
                if let Some(gap) = cells[..used].iter().position(|c| c.is_empty()) {
                    return Err(DataError::Malformed {
                        line,
                        message: format!("empty event cell in column `{}` before later events", &headers[cols[gap]]),
                    });
                }
                cells[..used].to_vec()
            }
        };
        if codes.is_empty() {
            return Err(DataError::EmptySequence { line, case_id });
        }
        if seen.insert(case_id.clone(), ()).is_some() {
            return Err(DataError::DuplicateCase { line, case_id });
        }
        let events = codes.iter().map(|c| alphabet.intern(c)).collect();
        for (attr, &col) in attributes.iter_mut().zip(&attr_cols) {
            attr.values.push(cell(col).to_string());
        }
        sequences.push(EventSequence {
            case_id,
            weight,
            events,
        });
    }
    SequenceDataset::new(alphabet, sequences, attributes)
}

/// Sort key for wide-layout event columns: pcrash columns first, then SOE.
fn wide_event_rank(header: &str) -> Option<(u8, u32)> {
    let lower = header.to_ascii_lowercase();
    let (group, digits) = if let Some(rest) = lower.strip_prefix("pcrash") {
        (0, rest)
    } else if let Some(rest) = lower.strip_prefix("soe") {
        (1, rest)
    } else {
        return None;
    };
    digits.parse().ok().map(|n| (group, n))
}

pub fn save_dataset(ds: &SequenceDataset, path: &Path, format: Format) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_dataset(ds, std::io::BufWriter::new(file), format)
}

pub fn write_dataset<W: Write>(ds: &SequenceDataset, writer: W, format: Format) -> Result<(), DataError> {
    let mut wtr = csv::WriterBuilder::new().flexible(false).from_writer(writer);
    let max_len = ds.sequences.iter().map(EventSequence::len).max().unwrap_or(0);
    let soe_count = max_len.saturating_sub(3);

    let mut header = vec!["case_id".to_string(), "weight".to_string()];
    match format {
        Format::Long => header.push("events".into()),
        Format::Wide => {
            header.extend((1..=3).map(|i| format!("pcrash{i}")));
            header.extend((1..=soe_count).map(|i| format!("soe{i}")));
        }
    }
    header.extend(ds.attributes.iter().map(|a| a.name.clone()));
    wtr.write_record(&header)?;

    for (row, seq) in ds.sequences.iter().enumerate() {
        let mut record = vec![seq.case_id.clone(), seq.weight.to_string()];
        let codes = ds.codes_of(row);
        match format {
            Format::Long => record.push(codes.join(";")),
            Format::Wide => {
                for slot in 0..3 + soe_count {
                    record.push(codes.get(slot).map_or_else(String::new, |c| c.to_string()));
                }
            }
        }
        record.extend(ds.attributes.iter().map(|a| a.values[row].clone()));
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

/// A mapping from source event codes to consolidated target codes.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingScheme {
    name: String,
    rows: Vec<SchemeRow>,
    mapping: HashMap<String, String>,
    target_alphabet: EventAlphabet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeRow {
    pub source: String,
    pub target: String,
    pub description: String,
}

impl EncodingScheme {
    pub fn new(name: impl Into<String>, rows: Vec<SchemeRow>) -> Result<Self, DataError> {
        let mut mapping = HashMap::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let line = i as u64 + 2;
            if row.source.is_empty() || row.target.is_empty() {
                return Err(DataError::Scheme {
                    line,
                    message: "empty source or target code".into(),
                });
            }
            if mapping.insert(row.source.clone(), row.target.clone()).is_some() {
                return Err(DataError::Scheme {
                    line,
                    message: format!("source code `{}` listed twice", row.source),
                });
            }
        }
        let target_alphabet = EventAlphabet::from_codes(rows.iter().map(|r| r.target.clone()));
        Ok(Self {
            name: name.into(),
            rows,
            mapping,
            target_alphabet,
        })
    }

    /// Maps every code of `alphabet` to itself.
    pub fn identity(alphabet: &EventAlphabet) -> Self {
        let rows = alphabet
            .codes()
            .iter()
            .map(|c| SchemeRow {
                source: c.clone(),
                target: c.clone(),
                description: String::new(),
            })
            .collect();
        Self::new("identity", rows).expect("alphabet codes are unique and non-empty")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> &[SchemeRow] {
        &self.rows
    }

    pub fn map(&self, code: &str) -> Option<&str> {
        self.mapping.get(code).map(String::as_str)
    }

    pub fn target_alphabet(&self) -> &EventAlphabet {
        &self.target_alphabet
    }

    pub fn source_len(&self) -> usize {
        self.rows.len()
    }
}

/// Reads a `source,target,description` CSV. The scheme is named after the file stem.
pub fn load_scheme(path: &Path) -> Result<EncodingScheme, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scheme".into());
    read_scheme(file, name)
}

pub fn read_scheme<R: Read>(reader: R, name: impl Into<String>) -> Result<EncodingScheme, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |n: &str| headers.iter().position(|h| h == n);
    let source = col("source").ok_or_else(|| DataError::MissingColumn("source".into()))?;
    let target = col("target").ok_or_else(|| DataError::MissingColumn("target".into()))?;
    let description = col("description");
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(SchemeRow {
            source: record.get(source).unwrap_or("").to_string(),
            target: record.get(target).unwrap_or("").to_string(),
            description: description
                .and_then(|d| record.get(d))
                .unwrap_or("")
                .to_string(),
        });
    }
    EncodingScheme::new(name, rows)
}

/// Result of [`apply_encoding`]: the recoded dataset and codes passed through unmapped.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub dataset: SequenceDataset,
    pub unmapped: Vec<String>,
}

/// Recodes every event through `scheme`.
///
/// In strict mode an unmapped code is an error. Otherwise unmapped codes pass
/// through unchanged and are listed in [`Encoded::unmapped`]. Lengths, weights,
/// case order and attributes are preserved; the new alphabet is in
/// first-appearance order of the recoded events.
pub fn apply_encoding(
    ds: &SequenceDataset,
    scheme: &EncodingScheme,
    strict: bool,
) -> Result<Encoded, DataError> {
    let mut alphabet = EventAlphabet::new();
    let mut unmapped = EventAlphabet::new();
    let mut sequences = Vec::with_capacity(ds.len());
    for seq in &ds.sequences {
        let mut events = Vec::with_capacity(seq.events.len());
        for &e in &seq.events {
            let code = ds.alphabet.code(e);
            let target = match scheme.map(code) {
                Some(t) => t,
                None if strict => {
                    return Err(DataError::UnmappedCode {
                        code: code.to_string(),
                        case_id: seq.case_id.clone(),
                        scheme: scheme.name.clone(),
                    })
                }
                None => {
                    unmapped.intern(code);
                    code
                }
            };
            events.push(alphabet.intern(target));
        }
        sequences.push(EventSequence {
            case_id: seq.case_id.clone(),
            weight: seq.weight,
            events,
        });
    }
    for code in unmapped.codes() {
        log::warn!("code `{code}` not covered by scheme `{}`; kept as is", scheme.name);
    }
    Ok(Encoded {
        dataset: SequenceDataset::new(alphabet, sequences, ds.attributes.clone())?,
        unmapped: unmapped.codes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub count: usize,
    pub total_weight: f64,
    pub min_length: usize,
    pub max_length: usize,
    pub mean_length: f64,
    /// `None` when every weight is zero.
    pub weighted_mean_length: Option<f64>,
    pub length_histogram: BTreeMap<usize, usize>,
    pub distinct_sequences: usize,
    pub alphabet_size: usize,
}

pub fn dataset_stats(ds: &SequenceDataset) -> Result<DatasetStats, DataError> {
    if ds.is_empty() {
        return Err(DataError::Empty);
    }
    let lengths: Vec<usize> = ds.sequences.iter().map(EventSequence::len).collect();
    let mut length_histogram = BTreeMap::new();
    for &l in &lengths {
        *length_histogram.entry(l).or_insert(0) += 1;
    }
    let weighted_sum: f64 = ds.sequences.iter().map(|s| s.weight * s.len() as f64).sum();
    Ok(DatasetStats {
        count: ds.len(),
        total_weight: ds.total_weight,
        min_length: *lengths.iter().min().expect("non-empty"),
        max_length: *lengths.iter().max().expect("non-empty"),
        mean_length: lengths.iter().sum::<usize>() as f64 / ds.len() as f64,
        weighted_mean_length: (ds.total_weight > 0.0).then(|| weighted_sum / ds.total_weight),
        length_histogram,
        distinct_sequences: distinct_sequences(ds)?.len(),
        alphabet_size: ds.alphabet.len(),
    })
}

/// Unique event lists with aggregated weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctSequences {
    /// Unique sequences in order of first appearance.
    pub sequences: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    /// Case index of the first case holding each unique sequence.
    pub first_case: Vec<usize>,
    /// For each case, the index of its unique sequence.
    pub case_to_unique: Vec<usize>,
}

impl DistinctSequences {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

pub fn distinct_sequences(ds: &SequenceDataset) -> Result<DistinctSequences, DataError> {
    if ds.is_empty() {
        return Err(DataError::Empty);
    }
    let mut lookup: HashMap<&[usize], usize> = HashMap::new();
    let mut out = DistinctSequences {
        sequences: Vec::new(),
        weights: Vec::new(),
        first_case: Vec::new(),
        case_to_unique: Vec::with_capacity(ds.len()),
    };
    for (case, seq) in ds.sequences.iter().enumerate() {
        let u = *lookup.entry(seq.events.as_slice()).or_insert_with(|| {
            out.sequences.push(seq.events.clone());
            out.weights.push(0.0);
            out.first_case.push(case);
            out.sequences.len() - 1
        });
        out.weights[u] += seq.weight;
        out.case_to_unique.push(u);
    }
    Ok(out)
}
