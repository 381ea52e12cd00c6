//! File formats, the HTTP planner backend and the `tale` command line on top
//! of `tale-core`.

pub mod backend;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod files;
pub mod records;

pub use error::{Result, TaleError};
