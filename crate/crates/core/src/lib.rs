//! Hypernymy detection from terms and their definitions.
//!
//! A pair (x, y) is classified as "y is a hypernym of x" from four attentive
//! convolutions over the terms and their definitions.

pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod model;
pub mod numcore;

pub use error::{Error, Result};
