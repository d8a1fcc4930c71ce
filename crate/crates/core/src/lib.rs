//! Exponentially stable model-reference adaptive control for linear plants
//! with matched parametric uncertainty, built on generalized dynamic
//! regressor extension and mixing (G-DREM). The library provides the small
//! dense linear algebra kernels, the estimator pipeline, the closed-loop
//! simulator with the three builtin experiment cases, and offline excitation
//! analysis of recorded traces.

pub mod error;
pub mod estimators;
pub mod excitation;
pub mod filters;
pub mod gdrem;
pub mod linalg;
pub mod mrac;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
