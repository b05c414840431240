//! The experiment harness behind the command-line interface: TOML
//! configuration, offline model training, the policy-comparison grid,
//! and the reward-surface export.

pub mod config;
pub mod pretrain;
pub mod run;
pub mod surface;

pub use config::ExperimentConfig;
pub use pretrain::{load_models, pretrain, PretrainedModels};
pub use run::{format_summary, run_experiment, RunOptions, RunReport};
pub use surface::{dump_surface, SurfaceOptions};
