//! Desk-scale laboratory for excess-risk bounds.
//!
//! Two families of learners are implemented together with the quantities
//! their guarantees are stated in:
//!
//! * ERM over epsilon-nets of a loss class ([`skeleton`]), driven by local
//!   entropies and their fixed points ([`entropy`]);
//! * stable and homogeneous sample compression schemes ([`compression`],
//!   [`svm`]), with exhaustive auditors for their structural properties.
//!
//! [`harness`] runs seeded Monte Carlo trials over both and checks the
//! resulting risk tables against the bound formulas.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compression;
pub mod domain;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod skeleton;
pub mod svm;

pub use error::{Error, Result};
