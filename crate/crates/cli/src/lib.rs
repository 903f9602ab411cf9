//! Command-line front end: scenario files, CSV/JSON/SVG output and the
//! built-in demos.

pub mod demo;
pub mod error;
pub mod export;
pub mod kernel_check;
pub mod plot;
pub mod scenario;

pub use error::{CliError, CliResult};
