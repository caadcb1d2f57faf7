//! Command implementations behind the `relex` binary: extraction runs,
//! ablation grids, low-resource sweeps, memory-growth curves, and SFT
//! dataset export. Everything is deterministic for a fixed config and seed
//! against the scripted backend.

pub mod commands;
pub mod report;
pub mod runner;
pub mod usage;

pub use commands::{cmd_ablate, cmd_distill, cmd_extract, cmd_lowres, cmd_memcurve};
pub use usage::UsageError;
