//! Host-side half of the DABNet toolkit: the `.dabw`, `.tns`, PPM and PGM
//! file formats, preprocessing, the wall-clock benchmark harness, report
//! formatting and the `dabnet` command line.
//!
//! All computation is delegated to [`dabnet_core`], re-exported here as
//! [`core`].

pub mod bench;
pub mod cli;
pub mod config;
mod error;
pub mod io;
pub mod report;

pub use dabnet_core as core;
pub use error::{Error, Result};
