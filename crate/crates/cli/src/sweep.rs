//! Sensitivity of clustering agreement to the localized indel parameters.

use rayon::prelude::*;
use serde::Serialize;

use seqom::agreement::agreement_report;
use seqom::cost::IndelModel;

use crate::config::{EGrid, PipelineConfig};
use crate::error::{CliError, Result, StageExt};
use crate::pipeline::{benchmark_labels, build_scheme, cluster_cases, compute_matrices, prepare};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub e: f64,
    pub g: f64,
    pub ari: f64,
    pub ami: f64,
    pub fms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub optimum: SweepRow,
}

/// Row with the largest ARI; the first (smallest `e`) wins ties.
pub fn optimum(rows: &[SweepRow]) -> Option<SweepRow> {
    rows.iter()
        .copied()
        .reduce(|best, r| if r.ari > best.ari { r } else { best })
}

/// `(e, 1 - 2e)` for every grid point.
pub fn grid_parameters(grid: &EGrid) -> Vec<(f64, f64)> {
    grid.values().into_iter().map(|e| (e, 1.0 - 2.0 * e)).collect()
}

/// For each `e` on the grid sets `g = 1 - 2e`, recomputes the matrix,
/// reclusters with the configured seed and scores against the benchmark.
/// Substitution costs are computed once and shared by all grid points.
pub fn sensitivity_sweep(cfg: &PipelineConfig) -> Result<SweepResult> {
    if !cfg.measure.is_localized() {
        return Err(CliError::config("sweep", format!("sweep needs a localized measure (LOMtr or LOMsf), not {}", cfg.measure)));
    }
    let column = cfg
        .benchmark
        .as_deref()
        .ok_or_else(|| CliError::config("sweep", "sweep needs a benchmark column"))?;
    let k = cfg.k.ok_or_else(|| CliError::config("sweep", "sweep needs a single `k`"))?;
    let params = grid_parameters(&cfg.e_grid);
    let prepared = prepare(cfg)?;
    let ds = &prepared.encoded;
    let labels = benchmark_labels(ds, column)?;
    let weights = ds.weights();

    let (e0, g0) = params[0];
    let mut base_cfg = cfg.clone();
    base_cfg.e = Some(e0);
    base_cfg.g = Some(g0);
    let base = build_scheme(&base_cfg, ds)?;
    let mut point_cfg = cfg.clone();
    point_cfg.threads = None;

    let run = || {
        params
            .par_iter()
            .map(|&(e, g)| {
                let scheme = base.with_indel(IndelModel::localized(e, g).stage("sweep")?).stage("sweep")?;
                let matrices = compute_matrices(&point_cfg, ds, &scheme)?;
                let a = cluster_cases(&point_cfg, &matrices, k)?;
                let r = agreement_report(&a.labels, labels, &weights, cfg.emi).stage("agreement")?;
                Ok(SweepRow {
                    e,
                    g,
                    ari: r.ari,
                    ami: r.ami,
                    fms: r.fms,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    let rows = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::config("sweep", e))?
            .install(run)?,
        None => run()?,
    };
    let optimum = optimum(&rows).expect("grid is never empty");
    Ok(SweepResult { rows, optimum })
}

pub fn write_sweep_csv(w: &mut dyn std::io::Write, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["e", "g", "ari", "ami", "fms"]).stage("write")?;
    for r in rows {
        out.write_record([r.e, r.g, r.ari, r.ami, r.fms].map(|v| v.to_string()))
            .stage("write")?;
    }
    out.flush().stage("write")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(e: f64, ari: f64) -> SweepRow {
        SweepRow { e, g: 1.0 - 2.0 * e, ari, ami: 0.0, fms: 0.0 }
    }

    #[test]
    fn optimum_prefers_smaller_e_on_ties() {
        let rows = [row(0.0, 0.2), row(0.1, 0.5), row(0.2, 0.5), row(0.3, 0.1)];
        assert_eq!(optimum(&rows).unwrap().e, 0.1);
        assert_eq!(optimum(&rows[3..]).unwrap().e, 0.3);
    }

    #[test]
    fn grid_rows_satisfy_constraint_exactly() {
        let grid: EGrid = "0:0.5:0.001".parse().unwrap();
        for (e, g) in grid_parameters(&grid) {
            assert_eq!(2.0 * e + g, 1.0, "e = {e}");
            assert_eq!(g, 1.0 - 2.0 * e);
        }
    }
}
