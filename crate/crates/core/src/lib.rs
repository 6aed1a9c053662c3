pub mod assembly;
pub mod elements;
pub mod error;
pub mod geometry;
pub mod hodge;
pub mod linsolve;
pub mod mesh;
pub mod mms;
pub mod stepper;
pub mod verify;

pub use error::{Error, Result};
