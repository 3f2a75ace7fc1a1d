//! Weak-label support vector machines by convex label generation.
//!
//! The learner replaces the mixed-integer problem "pick the best labeling and
//! the best SVM for it" with a minimax relaxation over the convex hull of
//! label kernels `K ⊙ ŷŷ'`. A cutting-plane loop grows a small working set of
//! labelings, solving a multiple label-kernel problem at each step and adding
//! a violated labeling found by sorting. Three tasks share the machinery:
//! semi-supervised classification, multi-instance classification and
//! two-class max-margin clustering.
//!
//! This crate is `no_std` (it needs `alloc`). Parsing, file formats and the
//! command line live in the companion `wellsvm` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod kernel;
pub mod labelgen;
pub mod learner;
pub mod metrics;
pub mod mlkl;
pub mod oracle;
pub mod svm_dual;

pub(crate) mod linalg;

pub use data::{Bag, BagDataset, Dataset, Label, SparseVector};
pub use error::{Error, Result};
pub use kernel::{GramMatrix, KernelSpec};
pub use labelgen::BalanceSpec;
pub use learner::{Task, TaskConfig, TraceRecord, WellsvmModel};
pub use mlkl::{LabelCandidate, WorkingSet};
pub use svm_dual::{BoxBounds, DualState};
