//! File formats, case manifests and the `pneumoreg` command line on top of
//! `pneumoreg-core`.

pub mod commands;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod output;

pub use error::{Error, Result};
