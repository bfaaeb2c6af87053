//! Tabular regression toolkit for generator fuel-consumption records.
//!
//! The crate provides CSV/synthetic data handling, four regressors built from
//! scratch (gradient boosting, random forest, a one-hidden-layer MLP, and
//! coordinate-descent Lasso), CART/Extra-Trees base learners with feature
//! importance, and an evaluation harness with NSE/Bias/MAE/RMSE/RSR metrics
//! and four cross-validation schemes.
//!
//! Every fitting routine is a pure function of its inputs and seeds: the same
//! dataset and config always produce the same model, bit for bit.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod linear;
pub mod neural;
pub mod rng;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
