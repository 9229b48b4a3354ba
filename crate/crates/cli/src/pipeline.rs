//! End-to-end runs: ingest, encode, costs, matrix, clustering, evaluation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use seqom::agreement::{agreement_report, AgreementReport};
use seqom::align::{distinct_matrix, expand_distinct, pairwise_matrix, MatrixOptions};
use seqom::cluster::{quality_over_k, representative_sequences, weighted_k_medoids, ClusterAssignment, QualityRow};
use seqom::cost::{read_substitution_csv, write_substitution_csv, CostOptions, CostScheme, IndelModel, Measure, SubstitutionMatrix};
use seqom::matrix::DissimilarityMatrix;
use seqom::seq::{apply_encoding, dataset_stats, load_dataset, load_scheme, DatasetStats, SequenceDataset};

use crate::config::{MatrixFormat, PipelineConfig};
use crate::error::{CliError, Result, StageExt};

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path, stage: &str) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::data(stage, format!("{}: {e}", path.display())))?;
    Ok(hex_digest(&bytes))
}

/// Dataset as loaded and after the optional encoding scheme.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub raw: SequenceDataset,
    pub encoded: SequenceDataset,
    pub unmapped: Vec<String>,
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    let raw = load_dataset(&cfg.input, cfg.format).stage("load")?;
    let (encoded, unmapped) = match &cfg.scheme {
        Some(path) => {
            let scheme = load_scheme(path).stage("encode")?;
            let enc = apply_encoding(&raw, &scheme, cfg.strict).stage("encode")?;
            if !enc.unmapped.is_empty() {
                log::warn!("codes kept unencoded: {}", enc.unmapped.join(", "));
            }
            (enc.dataset, enc.unmapped)
        }
        None => (raw.clone(), Vec::new()),
    };
    Ok(Prepared { raw, encoded, unmapped })
}

pub fn cost_options(cfg: &PipelineConfig) -> CostOptions {
    CostOptions {
        lag: cfg.q,
        weighted: cfg.weighted,
        denominator: cfg.denominator,
        normalize_max2: cfg.normalize_max2,
        e: cfg.e,
        g: cfg.g,
    }
}

/// Builds the configured cost scheme for `ds`.
pub fn build_scheme(cfg: &PipelineConfig, ds: &SequenceDataset) -> Result<CostScheme> {
    let options = cost_options(cfg);
    if cfg.measure != Measure::Custom {
        return CostScheme::preset(cfg.measure, ds, options).stage("costs");
    }
    let path = cfg.substitution.as_ref().expect("validated");
    let file = File::open(path).map_err(|e| CliError::data("costs", format!("{}: {e}", path.display())))?;
    let (codes, sub) = read_substitution_csv(file).stage("costs")?;
    let alphabet = ds.alphabet();
    let index: Vec<usize> = alphabet
        .codes()
        .iter()
        .map(|c| {
            codes
                .get(c)
                .ok_or_else(|| CliError::data("costs", format!("code `{c}` missing from {}", path.display())))
        })
        .collect::<Result<_>>()?;
    let n = alphabet.len();
    let mut values = Vec::with_capacity(n * n);
    for &a in &index {
        for &b in &index {
            values.push(sub.get(a, b));
        }
    }
    let indel = match (cfg.e, cfg.g) {
        (Some(e), Some(g)) => IndelModel::localized(e, g).stage("costs")?,
        _ => IndelModel::constant(cfg.indel).stage("costs")?,
    };
    CostScheme::new(Measure::Custom, SubstitutionMatrix::from_raw(n, values), indel, options).stage("costs")
}

pub fn matrix_options(cfg: &PipelineConfig) -> MatrixOptions {
    MatrixOptions {
        dedupe: cfg.dedupe,
        threads: cfg.threads,
        normalize: cfg.normalize,
    }
}

/// Case-level matrix plus the matrix used for clustering, and a map from
/// clustering rows back to cases.
pub struct Matrices {
    pub cases: DissimilarityMatrix,
    pub clustering: DissimilarityMatrix,
    /// `(case_to_row, row_to_first_case)`, or `None` when clustering runs on cases.
    pub mapping: Option<(Vec<usize>, Vec<usize>)>,
}

pub fn compute_matrices(cfg: &PipelineConfig, ds: &SequenceDataset, scheme: &CostScheme) -> Result<Matrices> {
    let options = matrix_options(cfg);
    if cfg.dedupe {
        let (unique, distinct) = distinct_matrix(ds, scheme, options).stage("matrix")?;
        let cases = expand_distinct(&unique, &distinct, ds).stage("matrix")?;
        Ok(Matrices {
            cases,
            clustering: unique,
            mapping: Some((distinct.case_to_unique, distinct.first_case)),
        })
    } else {
        let cases = pairwise_matrix(ds, scheme, options).stage("matrix")?;
        Ok(Matrices {
            clustering: cases.clone(),
            cases,
            mapping: None,
        })
    }
}

/// Clusters the clustering matrix and returns a case-level assignment.
pub fn cluster_cases(cfg: &PipelineConfig, m: &Matrices, k: usize) -> Result<ClusterAssignment> {
    let a = weighted_k_medoids(&m.clustering, k, cfg.seed, cfg.init).stage("cluster")?;
    Ok(match &m.mapping {
        Some((case_to_row, first_case)) => a.expand(case_to_row, first_case),
        None => a,
    })
}

pub fn benchmark_labels<'a>(ds: &'a SequenceDataset, column: &str) -> Result<&'a [String]> {
    ds.attribute(column)
        .ok_or_else(|| CliError::config("agreement", format!("benchmark column `{column}` not found in input")))
}

/// Collects output files and removes them again if the run fails.
pub struct Bundle {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| CliError::data("write", format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        let file = File::create(&path).map_err(|e| CliError::data("write", format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| CliError::data("write", format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).stage("write")?;
            writeln!(w).stage("write")
        })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    /// Removes every file written so far (and the directory if this bundle created it).
    pub fn discard(self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

pub fn write_assignment(w: &mut dyn Write, case_ids: &[String], labels: &[usize]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["case_id", "cluster"]).stage("write")?;
    for (id, &l) in case_ids.iter().zip(labels) {
        out.write_record([id.as_str(), &(l + 1).to_string()]).stage("write")?;
    }
    out.flush().stage("write")
}

pub fn write_quality(w: &mut dyn Write, rows: &[QualityRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "aswW", "hg", "pbc", "hc", "aswW_z", "hg_z", "pbc_z", "hc_z"])
        .stage("write")?;
    for r in rows {
        let (q, z) = (r.indices, r.standardized);
        let fields = [q.asw_w, q.hg, q.pbc, q.hc, z.asw_w, z.hg, z.pbc, z.hc];
        let mut record = vec![r.k.to_string()];
        record.extend(fields.iter().map(|v| v.to_string()));
        out.write_record(&record).stage("write")?;
    }
    out.flush().stage("write")
}

pub fn write_matrix(w: &mut dyn Write, m: &DissimilarityMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Text => m.write_text(w).stage("write"),
        MatrixFormat::Binary => m.write_binary(w).stage("write"),
    }
}

#[derive(Debug, Serialize)]
struct StatsReport<'a> {
    input: &'a DatasetStats,
    encoded: Option<&'a DatasetStats>,
    unmapped: &'a [String],
}

#[derive(Debug, Serialize)]
struct CostReport {
    scheme: String,
    measure: Measure,
    indel: IndelModel,
    gamma_max: f64,
    alphabet: Vec<String>,
}

#[derive(Debug, Serialize)]
struct FileEntry {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    config: std::collections::BTreeMap<&'static str, String>,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

/// Summary of a finished pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub assignment: Option<ClusterAssignment>,
    pub quality: Vec<QualityRow>,
    pub agreement: Option<AgreementReport>,
}

/// Runs every stage and writes the report bundle into `cfg.out`. On failure
/// the files written by this run are removed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::config("config", "missing required key `out`"))?;
    if cfg.k.is_none() && cfg.k_range.is_none() {
        return Err(CliError::config("config", "one of `k` or `k_range` is required"));
    }
    let mut bundle = Bundle::create(&out)?;
    match run_stages(cfg, &mut bundle) {
        Ok(mut report) => {
            report.out = out;
            report.files = bundle.files().to_vec();
            Ok(report)
        }
        Err(e) => {
            bundle.discard();
            Err(e)
        }
    }
}

fn run_stages(cfg: &PipelineConfig, bundle: &mut Bundle) -> Result<PipelineReport> {
    let prepared = prepare(cfg)?;
    let ds = &prepared.encoded;
    let raw_stats = dataset_stats(&prepared.raw).stage("stats")?;
    let enc_stats = match cfg.scheme {
        Some(_) => Some(dataset_stats(ds).stage("stats")?),
        None => None,
    };
    let benchmark = match &cfg.benchmark {
        Some(col) => Some(benchmark_labels(ds, col)?),
        None => None,
    };
    bundle.write_json(
        "stats.json",
        &StatsReport {
            input: &raw_stats,
            encoded: enc_stats.as_ref(),
            unmapped: &prepared.unmapped,
        },
    )?;

    let scheme = build_scheme(cfg, ds)?;
    bundle.write("substitution.csv", |w| write_substitution_csv(scheme.substitution(), ds.alphabet(), w).stage("write"))?;
    bundle.write_json(
        "costs.json",
        &CostReport {
            scheme: scheme.describe(),
            measure: scheme.measure(),
            indel: scheme.indel(),
            gamma_max: scheme.substitution().gamma_max(),
            alphabet: ds.alphabet().codes().to_vec(),
        },
    )?;

    let matrices = compute_matrices(cfg, ds, &scheme)?;
    let matrix_name = match cfg.matrix_format {
        MatrixFormat::Text => "matrix.txt",
        MatrixFormat::Binary => "matrix.bin",
    };
    bundle.write(matrix_name, |w| write_matrix(w, &matrices.cases, cfg.matrix_format))?;

    let ks: Vec<usize> = match (cfg.k_range, cfg.k) {
        (Some(r), _) => r.values(),
        (None, Some(k)) if k >= 2 => vec![k],
        _ => Vec::new(),
    };
    let quality = if ks.is_empty() {
        Vec::new()
    } else {
        quality_over_k(&matrices.clustering, &ks, cfg.seed, cfg.init).stage("quality")?
    };
    if !quality.is_empty() {
        bundle.write("quality.csv", |w| write_quality(w, &quality))?;
    }

    let mut assignment = None;
    let mut agreement = None;
    if let Some(k) = cfg.k {
        let a = cluster_cases(cfg, &matrices, k)?;
        bundle.write("assignment.csv", |w| write_assignment(w, &ds.case_ids(), &a.labels))?;
        let reps = representative_sequences(ds, &a).stage("representatives")?;
        bundle.write("representatives.csv", |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["cluster", "share", "events"]).stage("write")?;
            for r in &reps {
                let events: Vec<&str> = r.events.iter().map(|&e| ds.alphabet().code(e)).collect();
                out.write_record([(r.cluster + 1).to_string(), r.share.to_string(), events.join(";")])
                    .stage("write")?;
            }
            out.flush().stage("write")
        })?;
        if let Some(labels) = benchmark {
            let report = agreement_report(&a.labels, labels, &ds.weights(), cfg.emi).stage("agreement")?;
            bundle.write_json("agreement.json", &report)?;
            agreement = Some(report);
        }
        assignment = Some(a);
    }

    let mut inputs = vec![FileEntry {
        file: cfg.input.display().to_string(),
        sha256: file_digest(&cfg.input, "manifest")?,
    }];
    for path in cfg.scheme.iter().chain(cfg.substitution.iter()) {
        inputs.push(FileEntry {
            file: path.display().to_string(),
            sha256: file_digest(path, "manifest")?,
        });
    }
    let outputs = bundle
        .files()
        .iter()
        .map(|p| {
            Ok(FileEntry {
                file: p.file_name().expect("file").to_string_lossy().into_owned(),
                sha256: file_digest(p, "manifest")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    bundle.write_json(
        "manifest.json",
        &Manifest {
            tool: "seqom",
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.to_map(),
            inputs,
            outputs,
        },
    )?;
    Ok(PipelineReport {
        out: PathBuf::new(),
        files: Vec::new(),
        assignment,
        quality,
        agreement,
    })
}
