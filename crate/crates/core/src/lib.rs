pub mod cli;
pub mod error;
pub mod metrics;
pub mod dataio;
pub mod degradation;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
