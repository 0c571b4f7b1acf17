//! Experiment runner: config parsing, replicated runs, QQ statistics.

pub mod config;
pub mod qq;
pub mod run;
pub mod selftest;

pub use config::{
    parse_config, parse_config_str, CheckpointSpec, ExperimentConfig, MuNuChoice, CONFIG_KEYS,
};
pub use qq::{emit_qq, ks_statistic, qq_report, standardize, QqReport};
pub use run::{
    mean_functional, run_experiment, CheckpointSummary, Experiment, Summary, TrialResult, TrialRow,
};
pub use selftest::{run_selftest, Check};
