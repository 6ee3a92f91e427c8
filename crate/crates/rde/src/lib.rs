//! Reference distance estimators for semi-supervised text classification.
//!
//! An RDE is a linear classifier whose weight for feature j is
//! P(r|j) - P(r), where r is a Boolean reference feature correlated with
//! the class. Those weights are co-occurrence statistics, so they can be
//! estimated from unlabeled data alone; labeled data is needed only to pick
//! good reference features and combine several of them.
//!
//! The crate provides:
//!
//! * corpus ingestion into sparse binary feature vectors ([`corpus`]),
//! * frequency counting and the imbalance / conditional-dependence
//!   coefficients ([`stats`]),
//! * RDE construction and scoring, including the semi-perfect
//!   gold-standard variant ([`rde`]),
//! * distance-to-semi-perfect bounds and the reference ranking criterion
//!   ([`bounds`]),
//! * reference selection, pruning and the ridge-logistic ensemble
//!   ([`ensemble`]),
//! * AUC evaluation, a Naive Bayes baseline, synthetic generators and the
//!   experiment/diagnostics harnesses ([`eval`]),
//! * the `rde` command-line pipeline ([`cli`]).

pub mod artifact;
pub mod bounds;
pub mod cli;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod rde;
pub mod stats;

pub use error::{Error, Result};
