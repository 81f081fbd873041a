//! Hierarchical multi-label node classification.
//!
//! A class DAG is normalized into a tree, split into sub-hierarchies, and
//! every trainable class gets a local binary classifier over topological,
//! node2vec and neighborhood-label features. Local probabilities multiply
//! down each path, so predictions respect the true-path rule by
//! construction.
//!
//! [`pipeline::Pipeline`] runs the stages with cached, hash-checked
//! artifacts; the `hmc` binary exposes them as subcommands.

pub mod config;
pub mod dataset;
pub mod embed;
pub mod engine;
pub mod error;
pub mod graph;
pub mod hbn;
pub mod hierarchy;
pub mod io;
pub mod learn;
pub mod metrics;
pub mod obo;
pub mod pipeline;
pub mod resample;
pub mod seed;
pub mod synthetic;
