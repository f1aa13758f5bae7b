//! One-shot neural architecture search on a weight-entangled supernet.
//!
//! The crate trains one over-parameterized network whose channel slices are
//! shared across all candidate subnets, learns where on the complexity axis
//! training effort pays off (a shifted sampling distribution over resource
//! bins), and trains a recurrent generator that maps a requested complexity
//! to a concrete architecture. Trained subnets are extracted by slicing, no
//! retraining.
//!
//! Entry points: [`trainer::Trainer`] drives the joint loop,
//! [`generator::ArchGenerator`] emits architectures for a target complexity,
//! [`analysis`] hosts the evaluation protocols (Pareto sweep, ranking
//! correlation, sampler benchmarks), and the `archshift` binary exposes all
//! of it as subcommands. The `examples/` directory has one runnable program
//! per capability.

pub mod analysis;
pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod generator;
pub mod persist;
pub mod rng;
pub mod supernet;
pub mod shift;
pub mod space;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};

/// Entry point for the `archshift` binary. Returns a process exit code.
pub fn run_cli() -> i32 {
    cli::run()
}
