//! Randomness-hardened random forests against evasion attacks.
//!
//! The crate trains pools of decision trees whose split criteria are
//! down-weighted for vulnerable features (measured by a per-node
//! differential ratio), spectrally clusters the pool by shared-feature
//! similarity so a random subset of models can answer each query, bounds
//! the number of features an attacker must modify via critical-count
//! certificates, and simulates black-box probing attacks to measure the
//! resulting robustness.
//!
//! Modules follow the pipeline order:
//!
//! * [`data`] — schema-typed datasets, splits, bootstrap, negative profile
//! * [`tree`] — weighted decision-tree induction and critical paths
//! * [`forest`] — plain / weighted random forests and pooled voting
//! * [`cluster`] — similarity graph, spectral clustering, per-query selection
//! * [`robustness`] — critical counts, certificates, brute-force oracle
//! * [`attack`] — probing-order learning and bounded/unbounded attacks
//! * [`experiment`] — seeded multi-run harness behind the CLI
//! * [`synth`] — deterministic synthetic dataset generators

pub mod attack;
pub mod cluster;
pub mod data;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod linalg;
pub mod rng;
pub mod robustness;
pub mod synth;
pub mod tree;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
