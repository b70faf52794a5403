pub mod bounds;
pub mod cli;
pub mod conjugacy;
pub mod cutoff;
pub mod error;
pub mod oracle;
pub mod polyalg;
pub mod rdt_app;
pub mod splitting;

pub use error::{Error, Result};
