//! Command-line front end for the cutoff/waiting solver and simulator.
//!
//! [`config`] holds the flag-independent run description (round-trippable as
//! flat `key=value` lines); [`run`] executes a config and renders CSV and
//! JSON from the same numbers.

pub mod config;
pub mod run;

pub use config::{Command, OutputFormat, RunConfig, ThetaArg};
pub use run::{execute, RunOutput};
