//! Half-integral weight modular forms on Γ₀(4), quadratic character sums,
//! Dirichlet-polynomial moments and twisted L-value experiments.

pub mod analytic;
pub mod arith;
pub mod cache;
pub mod charsum;
pub mod error;
pub mod experiments;
pub mod kohnen;
pub mod lfunc;
pub mod moments;
pub mod numfield;
pub mod qseries;
pub mod quad;
pub mod que;
pub mod rankin;
pub mod record;
pub mod special;
pub mod testfn;

pub use error::{Error, Result};
