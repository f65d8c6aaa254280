//! Empirical Bayes estimation of the second-order structure of nonstationary time series.
//!
//! The pipeline builds the empirical ambiguity function of the analytic signal, fits a
//! two-component mixture to its normalized magnitudes, shrinks each coefficient by its
//! posterior median, and inverts the result into lag-time moments. From those it assembles
//! a positive semi-definite covariance matrix and any bilinear time-frequency surface.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambiguity;
pub mod covariance;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod optim;
pub mod pipeline;
pub mod procgen;
pub mod shrinkage;
pub mod signal;
pub mod tfr;

pub use ambiguity::{AmbiguityGrid, LagTimeMoments, NormalizationField, SmoothingKernel};
pub use covariance::{Correction, HermitianCovariance};
pub use diagnostics::{QQData, RiskReport};
pub use error::{Error, Result};
pub use pipeline::{analyze, shrink, Analysis, PipelineOptions, Shrunk};
pub use procgen::{Preset, TheoreticalCovariance};
pub use shrinkage::{FitDomain, FitOptions, MedianApprox, ShrinkageParams, ThresholdField};
pub use signal::{AnalyticSeries, TimeSeries};
pub use tfr::{TFRGrid, TimeKernel};

pub use ndarray;
pub use num_complex::Complex64;
