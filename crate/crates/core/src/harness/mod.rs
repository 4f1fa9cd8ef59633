//! Experiment orchestration: configuration, shared-network episodes,
//! experiments, and result files.

pub mod artifacts;
pub mod config;
pub mod episode;
pub mod experiments;

pub use artifacts::{emit_results, wilson_interval, EpisodeRow, RunManifest};
pub use config::ExperimentConfig;
pub use episode::{run_episode, run_network_episode, EpisodeMetrics, NetworkEpisode, StepLog};
pub use experiments::{capacity_sweep, compare_policies, train_all, train_stage, Stage, SummaryRow};
