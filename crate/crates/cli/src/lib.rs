//! Batch entry points behind the `evolad` binary: oracle replays, the
//! toggle ablation, λ sweeps and synthetic stream generation. Each writes a
//! run directory with a `manifest.json` that reproduces it.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run_ablate, run_replay, run_sweep, run_synth_gen, RunDir, Summary};
pub use config::{AblationGrid, Overrides, RunConfig, SweepSection};
pub use error::{CliError, Result};
