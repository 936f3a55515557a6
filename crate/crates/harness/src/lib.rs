//! Experiment orchestration on top of the `genbound` core: presets,
//! parallel runs, CSV/JSON/SVG artifacts and the `genbound` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod persist;

pub use error::{HarnessError, Result};
