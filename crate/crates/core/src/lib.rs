//! Dominance cut-offs and frequentist risks for Baranchik-type shrinkage
//! estimators of the mean of a spherically symmetric distribution under
//! balanced loss functions.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutoffs;
pub mod densities;
pub mod error;
pub mod estimators;
pub mod lemma_lab;
pub mod losses;
pub mod quadrature;
pub mod risk;
pub mod rng;

mod params;

pub use error::{Error, Result};
