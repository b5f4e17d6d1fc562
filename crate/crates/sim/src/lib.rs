//! Lockstep multi-robot simulator for swarm scripts: uniform placement at a
//! fixed density, range-limited situated broadcast with independent message
//! loss, and a seeded experiment harness that writes CSV.

pub mod config;
pub mod delivery;
pub mod placement;
pub mod run;
pub mod schedule;
pub mod seed;
pub mod sweep;

use thiserror::Error;

pub use config::SimulationConfig;
pub use placement::{place_robots, RobotPose, Topology};
pub use run::{run, run_with, Experiment, Predicate, RunResult, Simulation, StepMetrics};
pub use schedule::Schedule;
pub use sweep::{summarize, sweep, write_dataset, write_gnuplot, write_summary, RunRecord, Summary, SweepSpec};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("placed only {placed} of {n} robots without overlap; density too high")]
    Placement { placed: usize, n: usize },
    #[error("no connected placement found in {attempts} attempts; raise the range or the density")]
    Disconnected { attempts: usize },
    #[error("unknown script `{0}`")]
    UnknownScript(String),
    #[error("unknown convergence predicate `{0}` (expected consensus, gradient, barrier or none)")]
    UnknownPredicate(String),
    #[error(transparent)]
    Vm(#[from] swarmlang::VmError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
