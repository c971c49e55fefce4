//! End-to-end orchestration behind the CLI subcommands.

mod commands;
mod config;
mod manifest;
mod plot;

pub use commands::{cmd_dataset, cmd_eval, cmd_report, cmd_synth, cmd_train};
pub use config::{parse_config, PipelineConfig, SplitConfig};
pub use manifest::{Manifest, ManifestEntry, Origin, SplitSet};
pub use plot::render_history_charts;
