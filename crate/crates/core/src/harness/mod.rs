//! Experiment plumbing: configs, CSV traces, rate fits and the invariant suite.

pub mod analysis;
pub mod config;
pub mod experiment;
pub mod output;

pub use analysis::{classify, fit_rate, IterateAverager, RateFit, RateModel, RunStatus};
pub use config::{load_variants, parse_variants, sweep_variants, ConfigError, ExperimentConfig, Variant};
pub use experiment::{run_variant, summary, write_variant, ExperimentError, SeedRun, VariantResult};
pub mod verify;

pub use verify::{verify, VerifyItem, VerifyOptions};
