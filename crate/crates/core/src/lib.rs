//! Sparse contrastive feature extraction with dense feedforward networks.
//!
//! The extractor is trained full-batch by minimizing a four-part
//! objective over a labeled dataset: a weighted pairwise term that pulls
//! same-class outputs together and pushes different-class outputs apart,
//! an L1 sparsity penalty on the output activations, and squared weight
//! decay. Gradients are assembled from ordinary backpropagation passes
//! plus a signed-delta variant for the L1 term, and everything is
//! checkable against a central-finite-difference oracle.
//!
//! Module map:
//!
//! - [`network`]: the multilayer perceptron, forward passes, model files.
//! - [`objective`]: pair weighting and exact objective evaluation.
//! - [`backprop`]: squared-loss backprop and the pairwise gradient.
//! - [`grad_l1`]: the signed-delta pass for the sparsity term.
//! - [`pairs`]: full and heuristic pair-list construction.
//! - [`trainer`]: full-batch gradient assembly, descent, and the
//!   finite-difference oracle.
//! - [`data`]: CSV/IDX loaders, synthetic generators, feature export.
//! - [`eval`]: kNN, scatter ratio, and sparsity metrics for extracted
//!   features.

pub mod backprop;
pub mod data;
pub mod error;
pub mod eval;
pub mod grad_l1;
pub mod network;
pub mod objective;
pub mod pairs;
pub mod trainer;

mod vecmath;

pub use backprop::{backprop_sq, grad_j1_pair, GradientBuffer};
pub use data::LabeledDataset;
pub use error::{Result, SennsError};
pub use eval::EvalReport;
pub use grad_l1::{grad_j2_single, sign, SignedDeltaStack};
pub use network::{default_transfers, ForwardTrace, Network, ParamCoord, TransferKind};
pub use objective::{objective_value, Hyperparams, ObjectiveValue};
pub use pairs::{PairList, PairMode};
pub use trainer::{finite_diff_grad, grad_total, sgd_step, train, TrainOptions, TrainReport};
