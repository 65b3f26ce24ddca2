//! Config-driven experiment runs and their on-disk artifacts.

mod config;
mod data;
pub mod gradcheck;
mod plot;
mod run;

pub use config::{
    DataSettings, DynamicsSettings, ExperimentConfig, NoiseSettings, OutputSettings, Target, Task, DEFAULT_SEEDS,
    SCHEMA_VERSION,
};
pub use data::{linspace, regression_dataset, two_class_dataset, INNER_RADIUS, OUTER_RADII};
pub use plot::emit_plots;
pub use run::{read_summary, run, RunStatus, RunSummary, WeightComparison, CURVE_POINTS};
