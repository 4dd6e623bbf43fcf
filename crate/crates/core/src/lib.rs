//! Island Model of endogenous growth plus the statistical machinery used to
//! analyze it: a MultiQuaTEx-subset query language, an adaptive SMC
//! estimator and per-instance Welch t-tests.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or the command line lives in the `islet` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are meant to catch NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod hyptest;
pub mod model;
pub mod quatex;
pub mod random;
pub mod sim;
pub mod smc;
pub mod stats;

pub use hyptest::{compare_series, power, welch_test, ComparisonRow, HypError, SampleSummary, WelchOutcome};
pub use model::{ModelParams, ParamError, ParamName, WorldState};
pub use quatex::{parse, QuerySpec};
pub use sim::{derive_seed, IslandSimulator, SimError, Simulator, SimulatorFactory};
pub use smc::{estimate, Estimation, InstanceEstimate, SmcError, SmcSettings};
pub use stats::Accumulator;
