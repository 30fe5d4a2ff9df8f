//! Algorithmic core of the spam-classification lab.
//!
//! Everything here is `no_std` and needs only an allocator: text
//! preparation, bag-of-words featurization, the twelve classifiers, the
//! L-BFGS optimizer they share, evaluation metrics, paired t-tests and
//! Shapley attributions. File IO, timing and the command line live in the
//! `spamlab` crate.

#![no_std]
// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod explain;
pub mod math;
pub mod models;
pub mod numopt;
pub mod rng;
pub mod stats;
pub mod textprep;
pub mod vectorize;

pub use corpus::{Corpus, Document, Label, SplitPlan};
pub use error::{Error, Result};
pub use models::{ClassifierKind, ClassifierSpec, ModelParams, TrainedModel};
pub use textprep::{PrepConfig, TokenStream};
pub use vectorize::{Dictionary, FeatureMatrix};
