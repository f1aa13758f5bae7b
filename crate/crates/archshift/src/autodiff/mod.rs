//! Minimal reverse-mode autodiff engine over dense f64 matrices.
//!
//! Scope is deliberately narrow: rank <= 2 arrays, the ops this crate's
//! models need, single-threaded graphs. See [`value::Value`] for the
//! differentiation contract.

pub mod gradcheck;
pub mod matrix;
pub mod optim;
pub mod value;

pub use matrix::Matrix;
pub use optim::{Adam, ParamSet, Parameter, Sgd};
pub use value::Value;
