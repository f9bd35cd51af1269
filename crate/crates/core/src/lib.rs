//! Measure how complex-network topological measurements respond to
//! progressive modifications of a network (size growth, edge removal and
//! edge rewiring), and relate those responses through coincidence
//! similarity networks, agglomerative dendrograms and A/B/C classification.

pub mod coincidence;
pub mod config;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod graph;
pub mod hcluster;
pub mod matrix;
pub mod measurements;
pub mod pipeline;
pub mod signals;

pub use error::{Error, Result};
pub use graph::Graph;
