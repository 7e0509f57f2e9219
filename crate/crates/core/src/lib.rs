//! Detection of multiple influential observations in high-dimensional linear
//! regression.
//!
//! Every statistic is computed from a single [`InfluenceMatrix`]: the
//! elementwise product of the standardized response with the standardized
//! predictors. Marginal correlations over any index set are row means of that
//! matrix, which turns leave-one-out and group-deletion influence measures into
//! cheap distance computations.
//!
//! The main entry point is [`mip::mip_detect`], which estimates a clean subset
//! with the alternating Min/Max random group deletion procedure and then tests
//! every remaining observation against it with Benjamini-Hochberg control of
//! the false discovery rate.
//!
//! Work that is data parallel (per-observation statistics, Monte-Carlo
//! replications) runs on rayon when the `parallel` feature is enabled. Results
//! never depend on the thread count: every random draw is keyed by a
//! counter-based stream identifier rather than by execution order.

pub mod chi2_fdr;
pub mod error;
pub mod exec;
pub mod him;
pub mod mip;
pub mod report;
pub mod robust_stats;
pub mod rng;
pub mod simbench;
pub mod subsample;

pub use error::{MipError, Result};
pub use exec::Exec;
pub use mip::{mip_detect, MipConfig};
pub use report::DetectionReport;
pub use robust_stats::{Dataset, EstimatorMode, InfluenceMatrix};
