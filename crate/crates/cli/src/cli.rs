//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use seqom::agreement::{agreement_report, Correlation, EmiMode};
use seqom::cluster::{quality_over_k, weighted_k_medoids, Init};
use seqom::cost::{validate_cost_scheme, write_substitution_csv};
use seqom::matrix::DissimilarityMatrix;
use seqom::seq::{apply_encoding, dataset_stats, load_dataset, load_scheme, save_dataset, Format, SequenceDataset};

use crate::config::{ConfigMap, KRange, PipelineConfig};
use crate::error::{CliError, Result, StageExt};
use crate::pipeline::{build_scheme, compute_matrices, prepare, run_pipeline, write_assignment, write_quality, Bundle};
use crate::reports::{alluvial_export, load_assignment, mantel_report, stem, write_flows, write_square};
use crate::sweep::{sensitivity_sweep, write_sweep_csv};

#[derive(Debug, Parser)]
#[command(name = "seqom", version, about = "Optimal-matching analysis of weighted event sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset summary as JSON.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recode a dataset with an encoding scheme.
    Encode {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Substitution matrix and indel model of a measure.
    Costs {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise dissimilarity matrix (`.bin` extension selects the binary format).
    Distmat {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted k-medoids on a matrix file.
    Cluster {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "build")]
        init: Init,
        /// Assignment CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Quality indices over a range of cluster counts.
    Quality {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long = "k-range")]
        k_range: KRange,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "build")]
        init: Init,
        #[arg(long)]
        out: PathBuf,
    },
    /// ARI, AMI and FMS between two categorizations.
    Agree {
        /// Assignment CSV (`case_id,cluster`).
        #[arg(long)]
        a: PathBuf,
        /// Second assignment CSV; alternatively use --input with --benchmark.
        #[arg(long)]
        b: Option<PathBuf>,
        /// Dataset supplying weights and, with --benchmark, the second categorization.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "long")]
        format: Format,
        #[arg(long)]
        benchmark: Option<String>,
        #[arg(long, default_value = "rounded")]
        emi: EmiMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise Mantel tests between matrix files.
    Mantel {
        #[arg(long, num_args = 2.., required = true)]
        matrices: Vec<PathBuf>,
        #[arg(long, default_value_t = 999)]
        permutations: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "pearson")]
        correlation: Correlation,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// ARI/AMI/FMS as a function of the localized indel parameter e (g = 1 - 2e).
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        clustering: ClusteringArgs,
        /// `start:stop:step`, default 0:0.4:0.01.
        #[arg(long = "e-grid")]
        e_grid: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Flow table between consecutive assignments.
    Alluvial {
        #[arg(long, num_args = 2.., required = true)]
        assignments: Vec<PathBuf>,
        /// Dataset supplying case weights (unit weights when omitted).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "long")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full run from a config file and/or flags.
    Pipeline {
        /// Flat `key = value` config file; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: OptDataArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        clustering: ClusteringArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    /// Encoding scheme CSV (`source,target,description`).
    #[arg(long)]
    pub scheme: Option<PathBuf>,
    /// Keep codes missing from the scheme instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct OptDataArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub scheme: Option<PathBuf>,
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// OMlev, OMtr, OMsf, LOMtr, LOMsf or custom.
    #[arg(long)]
    pub measure: Option<String>,
    /// Substitution matrix CSV for the custom measure.
    #[arg(long)]
    pub substitution: Option<PathBuf>,
    /// Constant indel cost for the custom measure.
    #[arg(long)]
    pub indel: Option<f64>,
    /// Transition lag.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub e: Option<f64>,
    #[arg(long)]
    pub g: Option<f64>,
    /// successor or all.
    #[arg(long)]
    pub denominator: Option<String>,
    /// Count transitions without case weights.
    #[arg(long)]
    pub unweighted: bool,
    /// Keep raw shared-future costs instead of rescaling them to a maximum of 2.
    #[arg(long = "raw-sf")]
    pub raw_sf: bool,
    /// none or maxlen.
    #[arg(long)]
    pub normalize: Option<String>,
    /// Align every case pair instead of distinct sequences only.
    #[arg(long = "no-dedupe")]
    pub no_dedupe: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClusteringArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "k-range")]
    pub k_range: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// build or random.
    #[arg(long)]
    pub init: Option<String>,
    /// Label column of the input used as reference categorization.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// rounded or exact.
    #[arg(long)]
    pub emi: Option<String>,
    /// text or binary.
    #[arg(long = "matrix-format")]
    pub matrix_format: Option<String>,
}

fn put<T: ToString>(map: &mut ConfigMap, key: &str, value: &Option<T>) -> Result<()> {
    match value {
        Some(v) => map.set(key, v.to_string()),
        None => Ok(()),
    }
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl DataArgs {
    fn apply(&self, map: &mut ConfigMap) -> Result<()> {
        map.set("input", self.input.display().to_string())?;
        put(map, "format", &self.format)?;
        put(map, "scheme", &path_str(&self.scheme))?;
        if self.lenient {
            map.set("strict", "false")?;
        }
        Ok(())
    }
}

impl OptDataArgs {
    fn apply(&self, map: &mut ConfigMap) -> Result<()> {
        put(map, "input", &path_str(&self.input))?;
        put(map, "format", &self.format)?;
        put(map, "scheme", &path_str(&self.scheme))?;
        if self.lenient {
            map.set("strict", "false")?;
        }
        Ok(())
    }
}

impl MeasureArgs {
    fn apply(&self, map: &mut ConfigMap) -> Result<()> {
        put(map, "measure", &self.measure)?;
        put(map, "substitution", &path_str(&self.substitution))?;
        put(map, "indel", &self.indel)?;
        put(map, "q", &self.q)?;
        put(map, "e", &self.e)?;
        put(map, "g", &self.g)?;
        put(map, "denominator", &self.denominator)?;
        put(map, "normalize", &self.normalize)?;
        put(map, "threads", &self.threads)?;
        if self.unweighted {
            map.set("weighted", "false")?;
        }
        if self.raw_sf {
            map.set("normalize_max2", "false")?;
        }
        if self.no_dedupe {
            map.set("dedupe", "false")?;
        }
        Ok(())
    }
}

impl ClusteringArgs {
    fn apply(&self, map: &mut ConfigMap) -> Result<()> {
        put(map, "k", &self.k)?;
        put(map, "k_range", &self.k_range)?;
        put(map, "seed", &self.seed)?;
        put(map, "init", &self.init)?;
        put(map, "benchmark", &self.benchmark)?;
        put(map, "emi", &self.emi)?;
        put(map, "matrix_format", &self.matrix_format)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data("write", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w)?;
    w.flush().stage("write")
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).stage("write")?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").stage("write"),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_data(data: &DataArgs) -> Result<SequenceDataset> {
    let format: Format = match &data.format {
        Some(f) => f.parse().stage("config")?,
        None => Format::Long,
    };
    let ds = load_dataset(&data.input, format).stage("load")?;
    match &data.scheme {
        Some(path) => {
            let scheme = load_scheme(path).stage("encode")?;
            Ok(apply_encoding(&ds, &scheme, !data.lenient).stage("encode")?.dataset)
        }
        None => Ok(ds),
    }
}

fn measure_config(data: &DataArgs, measure: &MeasureArgs) -> Result<PipelineConfig> {
    let mut map = ConfigMap::default();
    data.apply(&mut map)?;
    measure.apply(&mut map)?;
    PipelineConfig::from_map(&map)
}

fn load_matrix(path: &Path) -> Result<DissimilarityMatrix> {
    DissimilarityMatrix::load(path).stage("load")
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { data, out } => {
            let ds = load_data(&data)?;
            emit_json(&dataset_stats(&ds).stage("stats")?, out.as_deref())
        }
        Command::Encode { data, out } => {
            if data.scheme.is_none() {
                return Err(CliError::config("encode", "--scheme is required"));
            }
            let format: Format = match &data.format {
                Some(f) => f.parse().stage("config")?,
                None => Format::Long,
            };
            let ds = load_data(&data)?;
            save_dataset(&ds, &out, format).stage("write")
        }
        Command::Costs { data, measure, out } => {
            let cfg = measure_config(&data, &measure)?;
            let ds = prepare(&cfg)?.encoded;
            let scheme = build_scheme(&cfg, &ds)?;
            let report = validate_cost_scheme(&scheme);
            let mut bundle = Bundle::create(&out)?;
            let result = (|| {
                bundle.write("substitution.csv", |w| {
                    write_substitution_csv(scheme.substitution(), ds.alphabet(), w).stage("write")
                })?;
                bundle.write_json(
                    "costs.json",
                    &serde_json::json!({
                        "scheme": scheme.describe(),
                        "measure": scheme.measure(),
                        "indel": scheme.indel(),
                        "gamma_max": scheme.substitution().gamma_max(),
                        "alphabet": ds.alphabet().codes(),
                        "violations": report.violations,
                    }),
                )
            })();
            if result.is_err() {
                bundle.discard();
            }
            result.map(|_| ())
        }
        Command::Distmat { data, measure, out } => {
            let cfg = measure_config(&data, &measure)?;
            let ds = prepare(&cfg)?.encoded;
            let scheme = build_scheme(&cfg, &ds)?;
            let m = compute_matrices(&cfg, &ds, &scheme)?.cases;
            m.save(&out).stage("write")
        }
        Command::Cluster { matrix, k, seed, init, out } => {
            let m = load_matrix(&matrix)?;
            let a = weighted_k_medoids(&m, k, seed, init).stage("cluster")?;
            write_file(&out, |w| write_assignment(w, m.labels(), &a.labels))?;
            let medoids: Vec<&str> = a.medoids.iter().map(|&i| m.labels()[i].as_str()).collect();
            emit_json(&serde_json::json!({ "k": k, "objective": a.objective, "medoids": medoids }), None)
        }
        Command::Quality { matrix, k_range, seed, init, out } => {
            let m = load_matrix(&matrix)?;
            let rows = quality_over_k(&m, &k_range.values(), seed, init).stage("quality")?;
            write_file(&out, |w| write_quality(w, &rows))
        }
        Command::Agree { a, b, input, format, benchmark, emi, out } => {
            let (ids, first) = load_assignment(&a)?;
            let ds = match &input {
                Some(path) => Some(load_dataset(path, format).stage("load")?),
                None => None,
            };
            if let Some(ds) = &ds {
                if ds.case_ids() != ids {
                    return Err(CliError::data("agree", "assignment case ids do not match the dataset"));
                }
            }
            let second: Vec<String> = match (&b, &benchmark, &ds) {
                (Some(path), None, _) => {
                    let (ids_b, labels) = load_assignment(path)?;
                    if ids_b != ids {
                        return Err(CliError::data("agree", "the two assignments list different cases"));
                    }
                    labels
                }
                (None, Some(col), Some(ds)) => crate::pipeline::benchmark_labels(ds, col)?.to_vec(),
                _ => return Err(CliError::config("agree", "give either --b or --input with --benchmark")),
            };
            let weights = ds.map(|d| d.weights()).unwrap_or_else(|| vec![1.0; ids.len()]);
            let report = agreement_report(&first, &second, &weights, emi).stage("agreement")?;
            emit_json(&report, out.as_deref())
        }
        Command::Mantel { matrices, permutations, seed, correlation, out } => {
            let loaded = matrices
                .iter()
                .map(|p| Ok((stem(p), load_matrix(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let table = mantel_report(&loaded, permutations, seed, correlation)?;
            let mut bundle = Bundle::create(&out)?;
            let result = (|| {
                bundle.write("mantel_r.csv", |w| write_square(w, &table.names, &table.r))?;
                bundle.write("mantel_p.csv", |w| write_square(w, &table.names, &table.p_value))?;
                bundle.write_json("mantel.json", &table)
            })();
            if result.is_err() {
                bundle.discard();
            }
            result.map(|_| ())
        }
        Command::Sweep { data, measure, clustering, e_grid, out } => {
            let mut map = ConfigMap::default();
            data.apply(&mut map)?;
            measure.apply(&mut map)?;
            clustering.apply(&mut map)?;
            put(&mut map, "e_grid", &e_grid)?;
            if map.get("e").is_none() && map.get("g").is_none() {
                // The grid supplies e and g; seed the config with a valid pair.
                map.set("e", "0.5")?;
                map.set("g", "0")?;
            }
            let cfg = PipelineConfig::from_map(&map)?;
            let result = sensitivity_sweep(&cfg)?;
            let mut bundle = Bundle::create(&out)?;
            let written = (|| {
                bundle.write("sweep.csv", |w| write_sweep_csv(w, &result.rows))?;
                bundle.write_json("sweep.json", &result)
            })();
            if written.is_err() {
                bundle.discard();
            }
            written?;
            emit_json(&result.optimum, None)
        }
        Command::Alluvial { assignments, input, format, out } => {
            let loaded = assignments
                .iter()
                .map(|p| load_assignment(p).map(|(ids, labels)| (stem(p), ids, labels)))
                .collect::<Result<Vec<_>>>()?;
            let ids = &loaded[0].1;
            if loaded.iter().any(|(_, other, _)| other != ids) {
                return Err(CliError::data("alluvial", "assignments list different cases"));
            }
            let weights = match &input {
                Some(path) => {
                    let ds = load_dataset(path, format).stage("load")?;
                    if &ds.case_ids() != ids {
                        return Err(CliError::data("alluvial", "assignment case ids do not match the dataset"));
                    }
                    ds.weights()
                }
                None => vec![1.0; ids.len()],
            };
            let stages: Vec<(String, Vec<String>)> = loaded.into_iter().map(|(name, _, labels)| (name, labels)).collect();
            let flows = alluvial_export(&stages, &weights)?;
            write_file(&out, |w| write_flows(w, &flows))
        }
        Command::Pipeline { config, data, measure, clustering, out } => {
            let mut map = match &config {
                Some(path) => ConfigMap::load(path)?,
                None => ConfigMap::default(),
            };
            data.apply(&mut map)?;
            measure.apply(&mut map)?;
            clustering.apply(&mut map)?;
            put(&mut map, "out", &path_str(&out))?;
            let cfg = PipelineConfig::from_map(&map)?;
            let report = run_pipeline(&cfg)?;
            for file in &report.files {
                println!("{}", file.display());
            }
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
