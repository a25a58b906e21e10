//! Functional data analysis toolkit for epidemic-style daily time series.
//!
//! The crate covers the numerical pipeline needed to turn collections of
//! noisy daily series into smooth curves and to analyze those curves as
//! single data objects:
//!
//! * [`grid`] / [`bspline`] — evaluation grids, cubic B-spline bases,
//!   roughness penalties and exact Gram matrices.
//! * [`smoothing`] — penalized least-squares smoothing with GCV selection
//!   of the smoothing parameter, shared across a curve collection.
//! * [`registration`] — landmark (peak) registration and domain integration.
//! * [`clustering`] — mean-scaled squared L2 distances, complete-linkage
//!   agglomerative clustering and Hartigan-index model selection.
//! * [`features`] — derived scalar features: differential mortality, areas
//!   around a restriction date, peak ranks, lags, source-consistency ratios.
//! * [`elastic_net`] — standardized design matrices, the scalar elastic net
//!   with coordinate descent, lambda-max ratio feature ranking, stability
//!   resampling, cross-validation and regression diagnostics (PCA, VIF,
//!   partial R2).
//! * [`fgen`] — the functional elastic net (functional response, scalar
//!   covariates) solved by block coordinate descent in the basis Gram metric.
//! * [`concurrent`] — lagged concurrent function-on-function regression with
//!   pointwise OLS, standard errors and integrated / partial R2.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature is
//! enabled by default and only switches the float-math backend.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bspline;
pub mod clustering;
pub mod concurrent;
pub mod curve;
pub mod elastic_net;
pub mod error;
pub mod features;
pub mod fgen;
pub mod grid;
pub mod linalg;
pub(crate) mod math;
pub mod registration;
pub mod seed;
pub mod smoothing;

pub use bspline::BasisSystem;
pub use curve::{Curve, CurveSet};
pub use error::CoreError;
pub use grid::Grid;
pub use linalg::Mat;
