//! Batch front end for `spamlab-core`: reads corpora from disk, runs the
//! evaluation pipeline in parallel and writes CSV, JSON and SVG reports.

pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod svg;
pub mod timing;

pub use config::RunConfig;
pub use error::{AppError, AppResult};
