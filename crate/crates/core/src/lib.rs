pub mod assess;
pub mod cli;
pub mod error;
pub mod forward;
pub mod grid;
pub mod gwf;
pub mod illumination;
pub mod optics;
pub mod tvol;

pub use error::{Result, TsimError};
