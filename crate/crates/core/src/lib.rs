//! Model-agnostic explanation of black-box tabular classifiers.
//!
//! A black box is audited around each instance to produce a local rule
//! explanation with counterfactuals; local rules are then merged bottom-up
//! in a dendrogram and a BIC-scored cut gives a compact global rule set.

pub mod algebra;
pub mod blackbox;
pub mod data;
pub mod global;
pub mod neighborhood;
mod error;
pub mod rng;
pub mod rule;
pub mod stats;
pub mod surrogate;
pub mod synth;
pub mod tree;

pub use error::{Error, OracleError, Result};
