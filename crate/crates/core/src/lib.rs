//! Ordinal embedding laboratory: instance generators, realizability
//! certificates, constraint-graph arboricity, hinge-loss training and the
//! experiment drivers behind the `lab` binary.

pub mod cli;
pub mod constraint_graph;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod instances;
pub mod mas;
pub mod optimizer;
pub mod pairs;
pub mod realizability;
pub mod rng;
pub mod stats;

pub use embedding::Embedding;
pub use error::{LabError, Result};
pub use instances::{Constraints, Instance, ItemId, Quadruplet, Triplet};
