//! Robust multivariate chain-ladder loss reserving.
//!
//! The crate detects outlying accident/development cells in run-off
//! triangles by pooling Pearson residuals from a robust cross-classified
//! over-dispersed Poisson fit, applies one of several multivariate
//! outlier detection and adjustment techniques (bagplot, bagdistance,
//! adjusted outlyingness, minimum covariance determinant), backtransforms
//! the treated residuals into adjusted claims, and recomputes reserves
//! and their prediction error with a multivariate time-series
//! chain-ladder.

pub mod ao;
pub mod bag;
pub mod depth;
pub mod error;
pub mod figures;
pub mod geom;
pub mod glm;
pub mod mcd;
pub mod mcl;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;
pub mod triangle;

pub use error::{Error, Result};
