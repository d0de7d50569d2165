pub mod cli;
pub mod corpus;
pub mod error;
pub mod icd;
pub mod models;
pub mod rng;
pub mod synthetic;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
