pub mod ctensor;
pub mod error;
pub mod dataio;
pub mod signal;
pub(crate) mod wire;

pub use error::{Error, Result};
