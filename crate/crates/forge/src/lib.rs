//! IO, configuration, subprocess protocols and pipeline orchestration for
//! `anion-forge-core`. The `anion-forge` binary is a thin layer over
//! [`pipeline`].

pub mod config;
pub mod error;
pub mod external;
pub mod io;
pub mod pipeline;

pub use config::{ConfigFile, PipelineConfig};
pub use error::{ForgeError, Result};
