//! Representation-aware spectral clustering.
//!
//! Graphs are dense `0/1` adjacency matrices. A representation graph `R`
//! says which nodes can speak for which; the clustering algorithms here look
//! for cuts in a similarity graph `A` whose clusters are balanced with respect
//! to each node's neighbourhood in `R`.

pub mod algorithms;
pub mod error;
pub mod graph;
pub mod kmeans;
pub mod metrics;
pub mod oracle;
pub mod random;
pub mod rsbm;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Adjacency, ClusterAssignment, Graph};
