//! File formats, configuration, parallel execution and the command-line
//! driver around [`ppos_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod figures;
pub mod io;
pub mod report;

pub use error::{AppError, AppResult};
