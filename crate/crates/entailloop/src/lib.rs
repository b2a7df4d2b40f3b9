//! Entailment-search experiment toolkit.
//!
//! Given a corpus of text-hypothesis pairs, this crate builds lexical-overlap
//! feature vectors, trains a ridge-penalized logistic regression to decide
//! entailment, and runs the surrounding low-resource experiments:
//! thresholded self-training over an unlabeled pool, simulated pool-based
//! active learning with uncertainty sampling, class-imbalance resampling
//! (down/up/SMOTE), and a top-N BM25 retrieval baseline. A synthetic
//! imbalanced corpus generator stands in for private clinical data.
//!
//! All randomness flows from a single 64-bit seed through ChaCha8; see
//! [`harness::seed`] for the seeding policy.

pub mod active;
pub mod classifier;
pub mod corpus;
pub mod csvio;
pub mod error;
pub mod features;
pub mod harness;
pub mod imbalance;
pub mod matchers;
pub mod retrieval;
pub mod selftrain;

pub use error::{Error, Result};
