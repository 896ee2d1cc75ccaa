//! Laboratory for modality laziness in late-fusion multi-modal learning.

pub mod error;
pub mod eval;
pub mod fsutil;
pub mod nn;
pub mod report;
pub mod rng;
pub mod synth;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
