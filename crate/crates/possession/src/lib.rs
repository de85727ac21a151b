//! Data files, the score-table exchange format, parallel training and the
//! end-to-end pipeline around `possession-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod scorefile;

pub use config::RunConfig;
pub use error::{Error, Result};
