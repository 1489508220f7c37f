//! End-to-end pipelines: cross-validated classifier benchmark,
//! counterfactual evaluation, table rendering and paired-motion export.

mod benchmark;
mod config;
mod evaluate;
mod export;
mod table;

pub use benchmark::{run_cv_benchmark, CvReport, FoldScore, CV_MODELS};
pub use config::{derive_seed, DataSource, ExperimentConfig};
pub use evaluate::{holdout_split, run_cf_evaluation, train_bundle, CfEvaluation, CF_METRICS};
pub use export::{export_motion, read_paired_motion, PairedMotion};
pub use table::{emit_table, BenchmarkTable, TableFormat, TableRow};
