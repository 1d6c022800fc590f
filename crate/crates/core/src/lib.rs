//! Weak local linearization (LL) integrator for Itô SDEs with multiplicative noise.
//!
//! Each step freezes a first-order Taylor expansion of the drift and the
//! diffusion columns at the current state, computes the exact conditional
//! mean and second moment of the resulting linear SDE through one matrix
//! exponential of an augmented system, and samples the next state as
//! `mean + sqrt(cov) * eta` with two-point variates `eta`.
//!
//! The crate is `no_std` and only needs `alloc`. Threading, file formats and
//! the command line live in the companion `llweak-cli` crate.

#![no_std]
// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;

pub mod baselines;
pub mod linalg;
pub mod montecarlo;
pub mod problems;
pub mod scheme;
pub mod sde;

pub use error::Error;
pub use linalg::Matrix;
pub use sde::{LinearizationData, SdeProblem, TimeGrid};

pub type Result<T, E = Error> = core::result::Result<T, E>;
