//! Experiment harness for the 1D fragmentation solver: TOML configuration,
//! single runs, seed ensembles, parameter sweeps and their file outputs.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod run;

pub use config::{Overrides, RunConfig, SchemeKind, Variant};
pub use ensemble::{run_ensemble, run_sweep, Aggregate, EnsembleResult, SweepAxis, SweepResult};
pub use error::{CampaignError, Result};
pub use run::{build_simulation, run_single, RunResult, StopReason};
