//! Standard-library side of the simulator: TOML run configuration, atomic
//! CSV/JSON output, checkpoint files, parallel orchestration and the `pdtc`
//! command line. All numerics live in `pdtc-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::{validate_config, RunConfig};
pub use error::AppError;
