//! Scenario configuration, the closed-loop run and the comparison studies.

pub mod config;
pub mod run;
pub mod studies;

pub use config::{
    FilterDisturbance, InitialPose, NoiseScaling, NoiseSettings, ScenarioConfig, Seeds, UkfSettings,
    ValidationReport, VelocitySource,
};
pub use run::{
    relative_error, relative_error_channels, run, run_with, RunMetrics, RunOptions, RunOutput, TraceRecord,
};
pub use studies::{
    gamma_comparison, gamma_scenario, q_sweep, reference_floor, reference_scenario, trajectory_comparison,
    trajectory_pair, GammaEntry, ReferenceFloor, SweepEntry, TrajectoryComparison,
};
