//! File formats, reports, plots and the command line around
//! [`survkan_core`].

pub use survkan_core as core;

pub mod cli;
pub mod error;
pub mod export;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod report;

pub use error::{Error, Result};
