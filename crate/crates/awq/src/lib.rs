pub mod error;
pub mod hopf;
pub mod multivariate;
pub mod operators;
pub mod qseries;
pub mod univariate;
pub mod verify;

pub use error::{Error, Result};
