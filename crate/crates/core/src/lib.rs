pub mod cli;
pub mod constants;
pub mod error;
pub mod freeconv;
pub mod functional;
pub mod kacrice;
pub mod measure;
pub mod optimizer;
pub mod potential;
pub mod rmt;

pub use error::{Error, Result};
