//! Experiment harness, file formats, text rendering and the HTTP session
//! service built on `molone-core`.

pub mod error;
pub mod harness;
pub mod plan;
pub mod render;
pub mod service;
pub mod summary;

pub use error::{HarnessError, Result};
