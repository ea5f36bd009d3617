//! Learning and offline evaluation of individualized treatment-assignment
//! policies from randomized-experiment logs.
//!
//! Three approaches are supported: outcome prediction (OP), causal-effect
//! prediction (CP) and treatment-assignment prediction (TP). Policies are
//! evaluated with inverse-propensity scoring and, on generated data, with
//! exact regret against known potential outcomes.

pub mod balance;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod folds;
pub mod io;
pub mod policy;
pub mod rng;
pub mod synth;
pub mod tree;

pub use dataset::{Dataset, Observation, Schema, Violation};
pub use error::{Error, Result};
pub use folds::{make_folds, FoldPlan};
pub use policy::{Assign, Policy, PolicyKind};
pub use synth::{ScenarioConfig, SyntheticTruth};
pub use tree::{DecisionTree, Hyperparams, Task};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
