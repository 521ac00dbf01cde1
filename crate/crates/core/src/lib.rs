//! Bayesian consensus clustering for multivariate longitudinal data.
//!
//! Each subject carries one global cluster label and one local label per
//! marker; local labels agree with the global label with marker-specific
//! adherence. Every marker follows a generalized linear mixed model from the
//! exponential family, with cluster-specific fixed effects and random-effect
//! covariances.

pub mod assignment;
pub mod cli;
pub mod config;
pub mod dist;
pub mod error;
pub mod family;
pub mod harness;
pub mod linalg;
pub mod longdata;
pub mod mcmc;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod rng;
pub mod simgen;

pub use error::{BccError, Result};
