//! Aggression identification pipeline: corpus loading, text normalization,
//! handcrafted features, three neural classifiers, averaging and evaluation.

pub mod bundle;
pub mod corpus;
pub mod embedding;
pub mod ensemble;
pub mod error;
pub mod features;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod resources;
pub mod synthetic;
pub mod trainer;
pub mod verify;

pub use error::{CoreError, Result};
