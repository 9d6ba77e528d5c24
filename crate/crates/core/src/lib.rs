//! Uncertainty Characteristics Curves for regression prediction intervals.
//!
//! A model's bands are swept through a common scale `k`; every scale gives an
//! operating point of two costs (for example bandwidth against miss rate).
//! The area under the resulting curve summarizes the bands independently of
//! any single operating point, and its reduction relative to constant bands
//! around the same predictions measures how informative they are.

pub mod cli;
pub mod curve;
pub mod data;
pub mod metrics;
pub mod references;
pub mod report;
pub mod stats;
pub mod svg;
pub mod synthetic;

pub use curve::{
    auucc, auucc_gain, build_ucc, build_ucc_with, optimal_operating_point, partial_auucc,
    AxisPair, CurveError, InfinitePolicy, OperatingPoint, UccCurve,
};
pub use data::{DataError, Dataset, PredictionRecord};
pub use metrics::{mae_at_scale, MetricsError, ScaledView};
