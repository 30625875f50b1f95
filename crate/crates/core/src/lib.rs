//! Classification-tree inference on a breadth-first, branchless node layout.
//!
//! The crate provides four interchangeable evaluators that all produce the
//! same [`ClassAssignment`] for a given tree and dataset:
//!
//! - [`eval_serial`]: the branchless baseline, `child + (r[a] > t)` per step.
//! - [`eval_oracle_recursive`]: a conditional recursive descent over the
//!   linked tree, kept as an independent cross-check.
//! - [`eval_data_parallel`]: contiguous record ranges handed to workers.
//! - [`eval_speculative`] / [`eval_speculative_basic`]: every decision node
//!   of the tree is evaluated at once for a record, then the root-to-leaf path
//!   is resolved by successor doubling.
//!
//! Around the evaluators sit a lockstep SIMD model ([`warp`]) that counts
//! divergence and barrier work, and a closed-form cost model ([`cost`]).

#![forbid(unsafe_code)]

pub mod cost;
pub mod data;
pub mod data_parallel;
mod error;
mod exec;
pub mod serial;
pub mod speculative;
pub mod tree;
pub mod warp;

pub use crate::data::{ClassAssignment, Dataset};
pub use crate::data_parallel::{eval_data_parallel, eval_data_parallel_into, DataParallelConfig};
pub use crate::error::{Error, Result};
pub use crate::serial::{
    eval_oracle_recursive, eval_serial, eval_serial_into, mean_traversal_depth, oracle_with_depths,
    traversal_depths,
};
pub use crate::speculative::{
    eval_speculative, eval_speculative_basic, path_double_step, RecordTrace, ReductionMode,
    SpeculativeConfig, SpeculativeEvaluator,
};
pub use crate::tree::{
    encode_breadth_first, EncodedNode, EncodedTree, LeafPaths, LinkedNode, ProcessorNodeMap,
    TreeStats,
};
