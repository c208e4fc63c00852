//! Tree-based conditional density estimation over mixed continuous/discrete data.
//!
//! Four conditional estimators are provided on top of one greedy density-tree
//! engine:
//!
//! * CART-like trees that branch on the parents and keep a parametric
//!   distribution over the child in each leaf,
//! * stratified trees that branch on the parents first and the child second,
//! * joint trees over the child and its parents, conditionalized exactly by a
//!   sweep over the leaves consistent with the parent values,
//! * approximately conditionalized joint trees, where an auxiliary tree maps
//!   every query to a single joint leaf scaled by a precomputed coefficient.
//!
//! Leaves carry multinomials over discrete variables and one of several
//! continuous families (uniform, truncated Gaussian, linear-regression
//! Gaussian, independent linear interpolation, multilinear interpolation).
//! Conditional models compose into Bayesian networks whose structure is found by
//! a tiered hill-climbing search.

pub mod bnet;
pub mod cond;
pub mod data;
pub mod error;
pub mod harness;
pub mod leaf;
pub mod region;
pub mod rng;
pub mod stats;
pub mod tree;

#[cfg(test)]
mod testutil;

pub use bnet::{FactoredModel, NetworkStructure, SearchConfig};
pub use cond::{CondConfig, ConditionalModel, ConditionalSpec, Mode};
pub use data::{Dataset, Schema, Value, VarKind, Variable};
pub use error::{Error, Result};
pub use leaf::{EmFitConfig, LeafDist, LeafFamily};
pub use region::{Extent, Region};
pub use tree::{DensityTree, GrowConfig, TreeLearner};
