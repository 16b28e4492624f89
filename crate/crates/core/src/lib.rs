pub mod cli;
pub mod constants;
pub mod determinant;
pub mod error;
pub mod forms;
pub mod recurrence;
pub mod rodrigues;

pub use error::{Error, Result};
