//! Event-sequence analysis with optimal matching.
//!
//! * [`seq`] – datasets, encoding schemes, summaries.
//! * [`cost`] – substitution matrices and indel models for the OM presets.
//! * [`align`] – OM distance and parallel pairwise matrices.
//! * [`matrix`] – condensed dissimilarity matrices and their file formats.
//! * [`cluster`] – weighted k-medoids, quality indices, representatives.
//! * [`agreement`] – ARI, AMI, FMS and the Mantel test.
//! * [`synth`] – seeded synthetic data.

pub mod agreement;
pub mod align;
pub mod cluster;
pub mod cost;
pub mod matrix;
pub mod seq;
pub mod synth;

pub use agreement::{agreement_report, ami, ari, contingency, fms, mantel_test, AgreementError, Correlation, EmiMode, MantelResult};
pub use align::{om_distance, pairwise_matrix, AlignError, MatrixOptions, Normalization};
pub use cluster::{cluster_quality, quality_over_k, representative_sequences, weighted_k_medoids, ClusterAssignment, ClusterError, Init, QualityIndices};
pub use cost::{constant_costs, CostError, CostOptions, CostScheme, IndelModel, Measure};
pub use matrix::{DissimilarityMatrix, MatrixError};
pub use seq::{apply_encoding, load_dataset, load_scheme, DataError, EncodingScheme, Format, SequenceDataset};

/// Round-trippable text form of a float.
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
