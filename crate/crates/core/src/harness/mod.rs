//! Config-driven experiments over the other modules, with CSV output and
//! run manifests.

pub mod config;
pub mod experiments;
pub mod score_file;

pub use config::{EstimatorKind, ExperimentConfig, LogGrid, TGrid, TcComparisonConfig, XStar};
pub use experiments::*;
pub use score_file::ScoreSampleFile;
