pub mod commands;
pub mod datagen;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod learners;
pub mod meanshift;
pub mod metrics;
pub mod par;
pub mod rng;

pub use error::{Error, Result};
