//! Estimation of marginal causal odds ratios under confounding and joint
//! misclassification of a binary exposure and a binary outcome.
//!
//! The crate provides:
//!
//! * [`data_model`] — study records, cell-count tables and the deterministic
//!   expected-count engines for misclassification and validation sampling;
//! * [`glm`] — maximum-likelihood logistic regression (IRLS) with a small
//!   formula language;
//! * [`nuisance`] — estimation of the misclassification/propensity nuisance
//!   parameters in both the sensitivity/specificity and the predictive-value
//!   parameterization, plus the bijection between them;
//! * [`weights`] — the inverse-probability weight formulas;
//! * [`estimators`] — the Crude, PS, CCA, GP and IPWM odds-ratio estimators
//!   and the shrinkage transform;
//! * [`bootstrap`] — nonparametric bootstrap variance and percentile
//!   confidence intervals;
//! * [`simulation`] — the Monte Carlo study harness with its scenario
//!   registry, gamma calibration and the exact standardization oracle;
//! * [`reinfarction`] — the built-in reinfarction example data.

pub mod bootstrap;
pub mod data_model;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod nuisance;
pub mod reinfarction;
pub mod rng;
pub mod simulation;
pub mod weights;

pub use error::{Error, Result};
