//! Temporally adaptive stance classification.
//!
//! The crate builds temporal word embeddings under five strategies, trains a
//! fixed text CNN on embedding-encoded posts, and measures how classifier
//! performance persists as the gap between training and test years grows.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod experiment;
pub mod matrix;
pub mod rng;
