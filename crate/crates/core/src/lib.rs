//! Cross-space spectral graph filtering.
//!
//! Builds an attribute-space high-pass kernel from semi-supervised kernel
//! ridge regression, a topology low-pass kernel from the graph, fuses them,
//! and trains a deep graph-convolutional classifier on the fused operator.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod filters;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod mkl;
pub mod nystrom;
pub mod oracles;
pub mod synthetic;
pub mod trainer;
pub mod tsv;

pub use error::{Error, Result};
pub use graph::{Graph, LabelMatrix, SplitSpec};
pub use kernel::Kernel;
