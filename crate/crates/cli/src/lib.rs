//! Pipeline orchestration and command-line interface for `seqom`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric degeneracy.

pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod reports;
pub mod sweep;

pub use config::{ConfigMap, EGrid, KRange, PipelineConfig};
pub use error::{CliError, ErrorKind};
pub use pipeline::{run_pipeline, PipelineReport};
pub use reports::{alluvial_export, mantel_report, Flow, MantelTable};
pub use sweep::{sensitivity_sweep, SweepResult, SweepRow};
