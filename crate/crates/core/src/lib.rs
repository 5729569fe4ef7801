//! Certified classification for data near a union of low-dimensional subspaces.
//!
//! The classifier solves an l1-regularized reconstruction problem against a
//! dictionary of training points and votes with the labels of the dual active
//! set. Every query with a nonempty active set comes with a polyhedral region
//! on which the active set, and therefore the prediction, cannot change.
//!
//! Alongside it live a randomized-smoothing baseline, attacks restricted to
//! the certified region, and closed-form robust-risk examples.

pub mod analytic;
pub mod attacks;
pub mod bpdn;
pub mod certificate;
pub mod classifier;
pub mod data;
mod error;
pub mod linalg;
pub mod numerics;
pub mod par;
pub mod smoothing;

pub use error::{Error, Result};
