//! Defect-prediction-guided search-based test generation.

pub mod allocate;
pub mod corpus;
pub mod executor;
pub mod harness;
pub mod minilang;
pub mod predict;
pub mod search;
pub mod seed;
pub mod stats;
