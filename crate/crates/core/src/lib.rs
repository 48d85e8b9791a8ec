//! Frequency-severity loss models for DeFi protocol exploit cover.
//!
//! Monthly attack frequency is a per-protocol logistic regression on log TVL,
//! frequencies are coupled through a Gaussian copula built from a protocol
//! similarity matrix, and the loss ratio given an attack follows a two-part
//! model (an atom at total loss plus a logit-normal partial loss). On top of
//! the fitted models sit premium calculation under the expectation and
//! standard-deviation principles and Monte Carlo VaR/CTE for a portfolio.

pub mod datamodel;
pub mod dependence;
pub mod error;
pub mod frequency;
pub mod glm;
pub mod severity;
pub mod tailrisk;
pub mod numerics;
pub mod pricing;

pub use error::{Error, Result};
