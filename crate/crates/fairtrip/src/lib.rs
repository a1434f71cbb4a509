//! Dataset loaders, file formats and the experiment runner behind the
//! `fairtrip` command.

pub mod analysis_cmd;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod report;

pub use error::{Error, Result};
