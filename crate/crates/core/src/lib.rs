//! Gaussian-process node classification with the covariance of an
//! infinitely wide graph convolutional network.
//!
//! Pipeline: [`graph::normalize_adjacency`] → [`kernel::build_kernel`] →
//! [`gp::posterior`] → [`gp::classify`]. [`mc`] samples finite random networks
//! to check the analytic kernel, and [`experiments`] holds dataset tooling,
//! grid search and the timing harness.

pub mod base_kernels;
pub mod error;
pub mod gp;
pub mod graph;
pub mod kernel;
pub mod matrix;
pub mod mc;
mod par;

pub use base_kernels::{gram, BaseKernelSpec};
pub use error::{Error, Result};
pub use gp::{classify, encode_labels, posterior, GpFit, GpPosterior, LabeledSplit};
pub use graph::{normalize_adjacency, propagate, sandwich, Graph, NormalizedAdjacency};
pub use kernel::{build_kernel, initial_kernel, relu_layer, KernelConfig, Variant};
pub use matrix::{FeatureMatrix, KernelMatrix};
pub use mc::{empirical_covariance, kernel_discrepancy, sample_gcn_outputs, McConfig};
pub mod cli;
pub mod experiments;
pub mod io;
