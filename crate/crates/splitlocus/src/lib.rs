//! Scenario files, rayon-backed drivers and report writers around
//! [`splitlocus_core`]. The `splitlocus` binary is a thin wrapper over
//! [`run::run`].

pub mod exec;
pub mod output;
pub mod run;
pub mod scenario_file;

pub use splitlocus_core as core;

pub use exec::Rayon;
pub use run::{run, Check, Command, RunError, RunOptions, RunReport};
pub use scenario_file::{ScenarioError, ScenarioFile};
