//! Stochastic DC programming with recursive variance-reduced gradient
//! estimators, plus baselines, optimality metrics, problem builders and
//! LIBSVM data handling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod problems;
pub mod subproblem;

pub use error::{DcError, Result};
