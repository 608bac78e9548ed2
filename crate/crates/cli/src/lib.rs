//! Command-line orchestration for quantum-walk diffusion experiments: kernel
//! construction, forward sampling, training, generation, evaluation, and
//! omega sweeps. Stages communicate only through files in the output
//! directory, so each is independently re-runnable.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
