//! Mantel correlation tables, alluvial flow tables and assignment files.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use seqom::agreement::{mantel_test, Correlation};
use seqom::matrix::DissimilarityMatrix;

use crate::error::{CliError, Result, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MantelPair {
    pub first: String,
    pub second: String,
    pub r: f64,
    pub p_value: f64,
}

/// Symmetric table of pairwise Mantel statistics; diagonal entries are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MantelTable {
    pub names: Vec<String>,
    pub r: Vec<Vec<Option<f64>>>,
    pub p_value: Vec<Vec<Option<f64>>>,
    pub permutations: usize,
    pub seed: u64,
    pub pairs: Vec<MantelPair>,
}

/// Mantel test between every pair of named matrices.
pub fn mantel_report(
    matrices: &[(String, DissimilarityMatrix)],
    permutations: usize,
    seed: u64,
    method: Correlation,
) -> Result<MantelTable> {
    if matrices.len() < 2 {
        return Err(CliError::config("mantel", "need at least two matrices"));
    }
    let n = matrices.len();
    let mut r = vec![vec![None; n]; n];
    let mut p = vec![vec![None; n]; n];
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let res = mantel_test(&matrices[i].1, &matrices[j].1, permutations, seed, method)
                .stage(&format!("mantel {} vs {}", matrices[i].0, matrices[j].0))?;
            r[i][j] = Some(res.r);
            r[j][i] = Some(res.r);
            p[i][j] = Some(res.p_value);
            p[j][i] = Some(res.p_value);
            pairs.push(MantelPair {
                first: matrices[i].0.clone(),
                second: matrices[j].0.clone(),
                r: res.r,
                p_value: res.p_value,
            });
        }
    }
    Ok(MantelTable {
        names: matrices.iter().map(|(name, _)| name.clone()).collect(),
        r,
        p_value: p,
        permutations,
        seed,
        pairs,
    })
}

/// Square CSV with names along both axes and an empty diagonal.
pub fn write_square(w: &mut dyn Write, names: &[String], cells: &[Vec<Option<f64>>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    out.write_record(&header).stage("write")?;
    for (name, row) in names.iter().zip(cells) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
        out.write_record(&record).stage("write")?;
    }
    out.flush().stage("write")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub stage_from: String,
    pub category_from: String,
    pub stage_to: String,
    pub category_to: String,
    pub weight: f64,
}

/// Weighted flows between consecutive label sets. Categories appear in
/// first-appearance order within each stage.
pub fn alluvial_export(stages: &[(String, Vec<String>)], weights: &[f64]) -> Result<Vec<Flow>> {
    if stages.len() < 2 {
        return Err(CliError::config("alluvial", "need at least two label sets"));
    }
    if let Some((name, labels)) = stages.iter().find(|(_, l)| l.len() != weights.len()) {
        return Err(CliError::data(
            "alluvial",
            format!("label set `{name}` has {} cases, expected {}", labels.len(), weights.len()),
        ));
    }
    let order = |labels: &[String]| {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut names = Vec::new();
        let ids: Vec<usize> = labels
            .iter()
            .map(|l| {
                *index.entry(l.clone()).or_insert_with(|| {
                    names.push(l.clone());
                    names.len() - 1
                })
            })
            .collect();
        (ids, names)
    };
    let mut flows = Vec::new();
    for pair in stages.windows(2) {
        let (from_ids, from_names) = order(&pair[0].1);
        let (to_ids, to_names) = order(&pair[1].1);
        let mut table = vec![vec![0.0; to_names.len()]; from_names.len()];
        let mut seen = vec![vec![false; to_names.len()]; from_names.len()];
        for ((&a, &b), &w) in from_ids.iter().zip(&to_ids).zip(weights) {
            table[a][b] += w;
            seen[a][b] = true;
        }
        for (a, row) in table.iter().enumerate() {
            for (b, &w) in row.iter().enumerate() {
                if seen[a][b] {
                    flows.push(Flow {
                        stage_from: pair[0].0.clone(),
                        category_from: from_names[a].clone(),
                        stage_to: pair[1].0.clone(),
                        category_to: to_names[b].clone(),
                        weight: w,
                    });
                }
            }
        }
    }
    Ok(flows)
}

pub fn write_flows(w: &mut dyn Write, flows: &[Flow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for f in flows {
        out.serialize(f).stage("write")?;
    }
    out.flush().stage("write")
}

/// Reads a `case_id,cluster` file.
pub fn read_assignment<R: Read>(reader: R) -> Result<(Vec<String>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().stage("assignment")?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::data("assignment", format!("missing column `{name}`")))
    };
    let (id_col, cluster_col) = (col("case_id")?, col("cluster")?);
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.stage("assignment")?;
        ids.push(record.get(id_col).unwrap_or_default().to_string());
        labels.push(record.get(cluster_col).unwrap_or_default().to_string());
    }
    Ok((ids, labels))
}

pub fn load_assignment(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::data("assignment", format!("{}: {e}", path.display())))?;
    read_assignment(file)
}

/// File stem used to name a matrix or label set in reports.
pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
