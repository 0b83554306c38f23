//! Design and analysis toolkit for a dc-biased superconducting rectangular
//! microwave cavity: mode structure, static field maps, loss budgets,
//! frequency tuning, Rydberg line synthesis, and transmission calibration.

pub mod cli;
pub mod constants;
pub mod error;
pub mod fieldsolve;
mod fit;
pub mod geometry;
pub mod lossmodel;
pub mod parallel;
pub mod spectro;
pub mod tuning;
pub mod txn;

pub use error::{Error, Result};
