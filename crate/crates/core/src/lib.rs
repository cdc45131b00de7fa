//! Longitudinal missing-data laboratory.
//!
//! Generates linear growth-curve panels, imposes MAR or MNAR missingness,
//! analyzes each panel with full-information maximum likelihood or with
//! random-forest / nearest-neighbor single imputation followed by ML, and
//! reduces Monte Carlo replicates to relative bias and interval coverage.
//!
//! The numeric layers are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the usual `f64` instantiation.

// NaN-rejecting comparisons are written as `!(x > y)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod amputation;
pub mod datagen;
pub mod error;
pub mod fiml;
pub mod forest;
pub mod gcm;
pub mod harness;
pub mod knn;
pub mod linalg;
pub mod report;
pub mod scalar;

pub use amputation::{ampute, ampute_mar, ampute_mnar, Mechanism, MissingSpec};
pub use datagen::{derive_aux, sample_dataset, sample_dataset_with_aux, Seed};
pub use error::{Error, Result};
pub use gcm::{implied_moments, loading_matrix, mvn_logpdf, submoments, Param};
pub use scalar::Scalar;

pub type GcmParams = gcm::GcmParams<f64>;
pub type GcmParamsF32 = gcm::GcmParams<f32>;
pub type Moments = gcm::Moments<f64>;
pub type LongData = datagen::LongData<f64>;
pub type LongDataF32 = datagen::LongData<f32>;
pub type FitResult = fiml::FitResult<f64>;
pub type Forest = forest::Forest<f64>;
pub type RegressionTree = forest::RegressionTree<f64>;
pub type Mat = linalg::Mat<f64>;
