//! Ranks pre-trained vision-language models on an unlabeled downstream task.
//!
//! Each candidate model is represented by a [`DatasetBundle`] of precomputed
//! image and class-name embeddings. The main score measures how well the
//! class structure of the image features matches that of the text features:
//!
//! * node similarity: mean softmax probability (temperature `t`) of each
//!   image's zero-shot pseudo-label;
//! * edge similarity: rescaled Pearson correlation between the cosine graph
//!   over class features and the Bhattacharyya graph over per-class image
//!   Gaussians.
//!
//! Five training-free baselines, zoo-level ranking metrics and a synthetic
//! zoo generator round out the crate.

pub mod baselines;
pub mod bundle;
pub mod error;
pub mod graphs;
pub mod metrics;
pub mod synth;
pub mod vega;
pub mod zeroshot;
pub mod zoo;

pub use baselines::{BaselineConfig, BaselineScores};
pub use bundle::{
    load_bundle, write_bundle, DatasetBundle, EmbeddingMatrix, TemplateTensor, ValidationReport,
};
pub use error::{Error, Result};
pub use graphs::{CovMode, EdgeTransform};
pub use metrics::RankingMetrics;
pub use synth::{generate_bundle, generate_zoo, SynthConfig, ZooMember};
pub use vega::{vega_score, VegaConfig, VegaScore};
pub use zoo::{
    AblationTable, RankResult, ReportRow, ScoreConfig, ScoreReport, ZooEntry, ZooManifest,
};
