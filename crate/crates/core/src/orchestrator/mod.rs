//! Experiment configuration and the round loop.
//!
//! Each round the fleet is placed, the channel drawn, heads selected and
//! members matched; local updates are then averaged at the heads and at the
//! server, once per model version.

mod config;
mod report;
mod sim;
mod sweep;

pub use config::{DataConfig, DataSource, ExperimentConfig, FleetMode, Scenario, Seeds};
pub use report::{Algorithm, ClusteringSummary, RoundReport, SolverTimings, VersionMetrics, SUMMARY_COLUMNS};
pub use sim::{run_experiment, FederatedData, RoundSnapshot, Schedule, Simulation};
pub use sweep::{run_sweep, schedule_run, sweep_cell, CellStats, SweepSpec, SWEEP_COLUMNS};
