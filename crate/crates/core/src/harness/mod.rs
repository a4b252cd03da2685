//! Training loop, logging, sweeps and result analysis.

pub mod analysis;
pub mod config;
pub mod run;
pub mod sweep;

pub use analysis::{
    linspace, moving_average, relative_robustness, snngpp_histogram, AccuracyEntry, RobustnessTable,
    SignChangeHistogram,
};
pub use config::{ProblemKind, RunConfig};
pub use run::{train_run, train_with, IterRecord, IterationView, Metrics, RunLog, TrainProblem};
pub use sweep::{sweep_configs, ManifestRow};
