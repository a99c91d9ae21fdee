//! Interval-valued data under explicit latent microdata distributions.
//!
//! An interval `[a, b]` is read as centre `c = (a + b) / 2` and range
//! `r = b - a`; its microdata are `c + U r / 2` for a latent `U` on `[-1, 1]`.
//! On top of that model the crate provides Mallows' (L2 Wasserstein)
//! distances, barycentres, Fréchet variances, barycentric covariance
//! matrices, and routines that fit latent distributions from microdata.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod ingest;
pub mod interval;
pub mod latent;
pub mod linalg;
pub mod mallows;
pub mod moments;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use estimation::{ScaledSample, SummaryRow};
pub use ingest::{Aggregation, MicroRecord};
pub use interval::{Interval, IntervalBox, IntervalFrame, Violation};
pub use latent::{
    cross_moment, microdata_quantile, quantile_correlation, Kde, LatentDistribution, LatentSpec, Moments,
};
pub use linalg::Matrix;
pub use mallows::{MahalanobisForm, MomentSummary};
pub use moments::{Barycentre, Divisor, SymbolicCovariance};
