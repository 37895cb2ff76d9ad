//! Configuration, presets and artifact output for complete runs.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{ExperimentKind, ObservableKind, RunConfig};
pub use output::{Manifest, Table};
pub use run::{execute, run, RunOutcome};
