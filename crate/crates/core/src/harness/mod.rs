//! Experiment harness: configuration, seeded Monte Carlo runs, metrics and
//! CSV export.

pub mod config;
pub mod experiment;
pub mod export;
pub mod metrics;

pub use config::{AmbientKind, AuthMode, ExperimentConfig, LayoutKind, PowerModeKind, SweepAxis, SweepValue};
pub use experiment::{
    attack_scores, calibrate, derive_seed, dump_challenge_iq, genuine_scores, identification,
    leaked_information_trials, run_monte_carlo, run_point, Calibration, ConfusionMatrix,
    MetricsReport, TrialContext,
};
pub use export::export_all;
pub use metrics::{calibrate_delta, compute_roc, RocCurve, RocPoint};
