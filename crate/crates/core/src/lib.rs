pub mod dist;
pub mod error;
pub mod game;
pub mod hypothesis;
pub mod kernel;
pub mod pairwise;
pub mod predictors;
pub mod verify;

pub use error::{Error, Result};
