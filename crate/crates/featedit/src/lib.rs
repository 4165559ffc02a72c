//! File formats, experiment orchestration and the command-line front end
//! for channel-level feature editing.
//!
//! The numerical work lives in [`featedit_core`]; this crate reads and
//! writes `.feat` datasets, CSV tables and model files, resolves run
//! configurations and drives full experiments through [`run_pipeline`].

pub mod config;
pub mod error;
pub mod feat;
pub mod model;
pub mod pipeline;
pub mod roles;
pub mod tables;

pub use config::{ConfigSource, RunConfig, Variant};
pub use error::{Error, Result};
pub use pipeline::{run_pipeline, RunReport};
