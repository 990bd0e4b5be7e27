//! MAP estimation of random graph signals from nonlinear Gaussian
//! measurements.
//!
//! The crate provides the spectral graph machinery (Laplacian, GFT, graph
//! filters), nonlinear measurement models with analytic Jacobians, Gaussian
//! priors and linear baseline estimators, a family of iterative Gauss-Newton
//! MAP estimators whose updates can be expressed as the output of two graph
//! filters, power-system state estimation ingestion, and a reproducible
//! Monte Carlo experiment harness.

pub mod error;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod measurement;
pub mod parallel;
pub mod psse;
pub mod seeding;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
