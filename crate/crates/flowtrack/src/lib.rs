//! File formats, configuration, the Monte-Carlo harness and the command-line
//! front end of the tracker.

pub mod commands;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;

pub use config::{Mode, RunConfig};
pub use error::{Error, Result};
