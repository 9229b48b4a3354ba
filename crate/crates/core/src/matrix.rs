//! Condensed symmetric dissimilarity matrices and their file formats.
//!
//! Values are stored as the strict lower triangle in row order:
//! `d(1,0), d(2,0), d(2,1), d(3,0), ...`, so the entry for `i > j` sits at
//! `i * (i - 1) / 2 + j`.
//!
//! The text format is line oriented:
//!
//! ```text
//! n=<cases>
//! scheme=<provenance>
//! checksum=sha256:<hex digest of every following byte>
//! <label>\t<weight>          (n lines)
//! <value>                    (n(n-1)/2 lines, 17 significant digits)
//! ```
//!
//! The binary container holds the same fields, little endian, behind the
//! magic `SEQOMDM1` and followed by a SHA-256 digest of everything before it.

use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::fmt17;

const MAGIC: &[u8; 8] = b"SEQOMDM1";

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("condensed length mismatch: expected {expected} values for n = {n}, found {found}")]
    CondensedLengthMismatch { n: usize, expected: usize, found: usize },
    #[error("label count mismatch: expected {expected}, found {found}")]
    LabelCountMismatch { expected: usize, found: usize },
    #[error("checksum failure: file says {expected}, content hashes to {actual}")]
    Checksum { expected: String, actual: String },
    #[error("invalid value {value} at condensed position {index}")]
    InvalidValue { index: usize, value: f64 },
    #[error("malformed matrix file: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Number of condensed entries for `n` cases.
pub const fn condensed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of `(i, j)`, `i != j`, in the condensed triangle.
#[inline]
pub fn condensed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i > j { (i, j) } else { (j, i) };
    hi * (hi - 1) / 2 + lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    labels: Vec<String>,
    weights: Vec<f64>,
    values: Vec<f64>,
    scheme_name: String,
}

impl DissimilarityMatrix {
    pub fn new(
        labels: Vec<String>,
        weights: Vec<f64>,
        values: Vec<f64>,
        scheme_name: impl Into<String>,
    ) -> Result<Self, MatrixError> {
        let n = labels.len();
        if weights.len() != n {
            return Err(MatrixError::LabelCountMismatch {
                expected: n,
                found: weights.len(),
            });
        }
        if values.len() != condensed_len(n) {
            return Err(MatrixError::CondensedLengthMismatch {
                n,
                expected: condensed_len(n),
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(MatrixError::InvalidValue { index, value });
        }
        if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(MatrixError::Malformed(format!("invalid weight {w}")));
        }
        Ok(Self {
            labels,
            weights,
            values,
            scheme_name: scheme_name.into(),
        })
    }

    /// Builds a matrix from a distance function evaluated on `i > j`.
    pub fn from_fn(
        labels: Vec<String>,
        weights: Vec<f64>,
        scheme_name: impl Into<String>,
        mut dist: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, MatrixError> {
        let n = labels.len();
        let mut values = Vec::with_capacity(condensed_len(n));
        for i in 1..n {
            for j in 0..i {
                values.push(dist(i, j));
            }
        }
        Self::new(labels, weights, values, scheme_name)
    }

    /// Unit-weight matrix labelled `0..n`.
    pub fn unlabeled(n: usize, dist: impl FnMut(usize, usize) -> f64) -> Result<Self, MatrixError> {
        Self::from_fn((0..n).map(|i| i.to_string()).collect(), vec![1.0; n], "", dist)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.values[condensed_index(i, j)]
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scheme_name(&self) -> &str {
        &self.scheme_name
    }

    /// Same distances with replaced case weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, MatrixError> {
        Self::new(self.labels.clone(), weights, self.values.clone(), self.scheme_name.clone())
    }

    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<(), MatrixError> {
        let mut body = String::with_capacity(self.values.len() * 24 + self.labels.len() * 32);
        for (label, w) in self.labels.iter().zip(&self.weights) {
            if label.contains(['\t', '\n', '\r']) {
                return Err(MatrixError::Malformed(format!("label {label:?} contains a tab or newline")));
            }
            body.push_str(label);
            body.push('\t');
            body.push_str(&fmt17(*w));
            body.push('\n');
        }
        for v in &self.values {
            body.push_str(&fmt17(*v));
            body.push('\n');
        }
        if self.scheme_name.contains(['\n', '\r']) {
            return Err(MatrixError::Malformed("scheme name contains a newline".into()));
        }
        write!(
            writer,
            "n={}\nscheme={}\nchecksum=sha256:{}\n",
            self.n(),
            self.scheme_name,
            hex_digest(body.as_bytes())
        )?;
        writer.write_all(body.as_bytes())?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_text<R: Read>(mut reader: R) -> Result<Self, MatrixError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut rest = text.as_str();
        let mut header = |key: &str| -> Result<String, MatrixError> {
            let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
            rest = tail;
            line.strip_prefix(key)
                .and_then(|l| l.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| MatrixError::Malformed(format!("expected `{key}=` header line")))
        };
        let n: usize = header("n")?
            .trim()
            .parse()
            .map_err(|_| MatrixError::Malformed("n is not an integer".into()))?;
        let scheme_name = header("scheme")?;
        let checksum = header("checksum")?;
        let body = rest;

        let mut lines = body.lines();
        let mut labels = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for found in 0..n {
            let line = lines.next().ok_or(MatrixError::LabelCountMismatch { expected: n, found })?;
            let (label, weight) = line
                .split_once('\t')
                .ok_or_else(|| MatrixError::Malformed(format!("label line {} lacks a weight", found + 1)))?;
            labels.push(label.to_string());
            weights.push(parse_number(weight)?);
        }
        let values = lines.map(parse_number).collect::<Result<Vec<f64>, _>>()?;
        if values.len() != condensed_len(n) {
            return Err(MatrixError::CondensedLengthMismatch {
                n,
                expected: condensed_len(n),
                found: values.len(),
            });
        }
        let expected = checksum
            .strip_prefix("sha256:")
            .ok_or_else(|| MatrixError::Malformed("unsupported checksum".into()))?;
        let actual = hex_digest(body.as_bytes());
        if expected != actual {
            return Err(MatrixError::Checksum {
                expected: expected.to_string(),
                actual,
            });
        }
        Self::new(labels, weights, values, scheme_name)
    }

    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<(), MatrixError> {
        let mut buf = Vec::with_capacity(64 + 8 * (self.values.len() + self.weights.len()));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.n() as u64).to_le_bytes());
        put_str(&mut buf, &self.scheme_name);
        for label in &self.labels {
            put_str(&mut buf, label);
        }
        for w in &self.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        writer.write_all(&buf)?;
        writer.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self, MatrixError> {
        let mut buf = Vec::new();
        reader.read_to_end(&mut buf)?;
        if buf.len() < MAGIC.len() + 8 + 32 || &buf[..8] != MAGIC {
            return Err(MatrixError::Malformed("not a binary matrix container".into()));
        }
        let (content, digest) = buf.split_at(buf.len() - 32);
        let mut cur = Cursor { data: content, pos: 8 };
        let n = cur.u64()? as usize;
        let scheme_name = cur.string()?;
        let labels = (0..n).map(|_| cur.string()).collect::<Result<Vec<_>, _>>()?;
        let weights = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
        let remaining = (content.len() - cur.pos) / 8;
        if remaining != condensed_len(n) || (content.len() - cur.pos) % 8 != 0 {
            return Err(MatrixError::CondensedLengthMismatch {
                n,
                expected: condensed_len(n),
                found: remaining,
            });
        }
        let values = (0..remaining).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
        let actual = Sha256::digest(content);
        if actual.as_slice() != digest {
            return Err(MatrixError::Checksum {
                expected: to_hex(digest),
                actual: to_hex(&actual),
            });
        }
        Self::new(labels, weights, values, scheme_name)
    }

    /// Writes the binary container when `path` ends in `.bin`, text otherwise.
    pub fn save(&self, path: &Path) -> Result<(), MatrixError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_binary(file)
        } else {
            self.write_text(file)
        }
    }

    /// Reads either format, recognising the binary magic.
    pub fn load(path: &Path) -> Result<Self, MatrixError> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            Self::read_binary(bytes.as_slice())
        } else {
            Self::read_text(bytes.as_slice())
        }
    }
}

fn parse_number(s: &str) -> Result<f64, MatrixError> {
    s.trim()
        .parse()
        .map_err(|_| MatrixError::Malformed(format!("cannot parse number `{s}`")))
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hex_digest(bytes: &[u8]) -> String {
    to_hex(&Sha256::digest(bytes))
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8], MatrixError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| MatrixError::Malformed("truncated binary container".into()))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, MatrixError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, MatrixError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String, MatrixError> {
        let len = self.u64()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| MatrixError::Malformed("label is not utf-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DissimilarityMatrix {
        DissimilarityMatrix::new(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![1.0, 0.5, 3.25, 1.0 / 3.0],
            vec![1.0, 2.0, 0.1, 1.0 / 7.0, 0.0, 12.5],
            "LOMtr(q=1,e=0.1,g=0.8)",
        )
        .unwrap()
    }

    #[test]
    fn condensed_layout() {
        assert_eq!(condensed_len(2676), 3_579_150);
        assert_eq!(condensed_index(1, 0), 0);
        assert_eq!(condensed_index(2, 1), 2);
        assert_eq!(condensed_index(0, 3), 3);
        let m = sample();
        assert_eq!(m.get(3, 2), 12.5);
        assert_eq!(m.get(2, 3), 12.5);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn text_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        assert_eq!(DissimilarityMatrix::read_text(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn binary_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(DissimilarityMatrix::read_binary(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn truncated_text_reports_length() {
        let mut buf = Vec::new();
        sample().write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = text.trim_end().rsplit_once('\n').unwrap().0;
        let err = DissimilarityMatrix::read_text(cut.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("condensed length mismatch"), "{err}");
    }

    #[test]
    fn corrupted_text_fails_checksum() {
        let mut buf = Vec::new();
        sample().write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("1.2500000000000000e1", "1.2500000000000001e1");
        let err = DissimilarityMatrix::read_text(text.as_bytes()).unwrap_err();
        assert!(matches!(err, MatrixError::Checksum { .. }), "{err}");
    }

    #[test]
    fn corrupted_binary_fails_checksum() {
        let mut buf = Vec::new();
        sample().write_binary(&mut buf).unwrap();
        let k = buf.len() - 40;
        buf[k] ^= 1;
        assert!(matches!(DissimilarityMatrix::read_binary(buf.as_slice()), Err(MatrixError::Checksum { .. })));
    }

    #[test]
    fn rejects_bad_shapes() {
        let err = DissimilarityMatrix::new(vec!["a".into(), "b".into()], vec![1.0, 1.0], vec![], "").unwrap_err();
        assert!(matches!(err, MatrixError::CondensedLengthMismatch { .. }));
        let err = DissimilarityMatrix::new(vec!["a".into(), "b".into()], vec![1.0], vec![1.0], "").unwrap_err();
        assert!(matches!(err, MatrixError::LabelCountMismatch { .. }));
        let err = DissimilarityMatrix::new(vec!["a".into(), "b".into()], vec![1.0, 1.0], vec![-1.0], "").unwrap_err();
        assert!(matches!(err, MatrixError::InvalidValue { .. }));
    }

    #[test]
    fn save_and_load_pick_format_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        for name in ["m.txt", "m.bin"] {
            let path = dir.path().join(name);
            m.save(&path).unwrap();
            assert_eq!(DissimilarityMatrix::load(&path).unwrap(), m);
        }
    }
}
