//! File formats, dataset simulation, the benchmark driver and the
//! command-line front end around `chipprint-core`.

pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod simulate;

pub use chipprint_core as core;
pub use error::{AppError, AppResult};
