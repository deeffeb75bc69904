//! Almost periodic trigonometric sums, kernel partial sums, summability
//! classes and strong means, with numerical checks of the inequalities that
//! tie them together.


// NaN must fail every validity check, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod apfun;
pub mod cli;
pub mod config;
pub mod harness;
pub mod error;
pub mod kernels;
pub mod moduli;
mod quad;
pub mod strong_means;
pub mod summability;

pub use apfun::{ApFunction, LpExponent, Term};
pub use error::{Error, Result, Violation};
pub use quad::Estimate;
