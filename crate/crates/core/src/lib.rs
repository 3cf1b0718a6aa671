//! Variance-reduced ratio-of-means estimation with control variates.
//!
//! The crate estimates `R = E[A] / E[C]` from paired draws of `(A, B, C, D)`
//! where `B` and `D` are control variates for the numerator and the
//! denominator. It provides
//!
//! * the point estimators (MC/MC, CV/MC, CV/CV and their approximate-CV
//!   variants) in [`estimators`],
//! * every coefficient strategy, including the jointly optimal pair that
//!   minimizes the delta-method variance of the whole ratio, in
//!   [`coefficients`],
//! * closed-form delta-method variances and variance differences in
//!   [`variance_model`],
//! * a replication harness over Gaussian scenarios in [`simulation`],
//! * a differential-evolution search for extreme covariance structures in
//!   [`search`],
//! * a multi-fidelity bootstrap pipeline in [`mfmc_app`].
//!
//! Data-parallel loops go through [`exec`]; build without the default
//! `parallel` feature to get the sequential fallback.

pub mod coefficients;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod mfmc_app;
pub mod numerics;
pub mod search;
pub mod simulation;
pub mod variance_model;

pub use coefficients::{CoefficientSet, Strategy};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, RatioEstimate};
pub use numerics::{CovarianceStructure, JointSample, Matrix4, MomentSet, RngStream};
