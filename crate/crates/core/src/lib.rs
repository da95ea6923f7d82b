pub mod circuit;
pub mod inequality;
pub mod measures;
pub mod optimize;
pub mod error;
pub mod harness;
pub mod qstate;
pub mod seed;
pub mod transpile;

pub use error::{Error, Result};
