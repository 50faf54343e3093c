pub mod cli;
pub mod config;
pub mod error;
pub mod evolve;
pub mod fockspec;
pub mod generator;
pub mod groundfx;
pub mod qsym;
pub mod realize;
pub mod scalar;

pub use error::{Error, Result};
