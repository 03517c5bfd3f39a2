//! Time-series segmentation as node classification.
//!
//! A univariate series is turned into a graph with one node per time point
//! ([`transforms`]), and a small graph attention network ([`models`]) trained
//! from scratch on a subset of labelled nodes ([`training`]) assigns a
//! segment class to every point. The crate also carries the two baselines
//! (a sliding-window CNN and a change-point + K-Means pipeline in
//! [`unsupervised`]), the evaluation utilities ([`eval`]) and the
//! architecture search helpers ([`nas`]).
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `std` feature
//! for runtime SIMD dispatch in the matrix kernels, and `serde` for
//! serializable configuration types.

#![no_std]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod autodiff;
pub mod checks;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
mod math;
pub mod models;
pub mod nas;
pub mod training;
pub mod transforms;
pub mod unsupervised;

pub use error::{Error, Result};
