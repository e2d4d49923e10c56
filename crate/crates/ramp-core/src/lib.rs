//! Self-supervised pretraining of random-feature Q-bases on reward-free
//! trajectories, test-time reward recombination by ridge regression, and
//! model-predictive planning, together with the analytic environments,
//! baselines, and ground-truth oracles used to exercise them.
//!
//! The crate is `no_std` (with `alloc`): it performs no IO and never touches
//! a clock or an entropy source. Everything is a pure function of its inputs
//! and an explicit seed. File formats, configuration, and the CLI live in the
//! companion `ramp-cli` crate.
#![no_std]
// Test builds link std, whose inherent f64 methods shadow the
// `num_traits::Float` calls the no_std build needs.
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

pub mod baseline;
pub mod envs;
pub mod error;
pub mod features;
pub mod linalg;
pub mod oracle;
pub mod planner;
pub mod qbasis;
pub mod rewardfit;
pub mod rng;
pub mod tinynet;

pub use error::{Error, Result};
pub use linalg::Matrix;
