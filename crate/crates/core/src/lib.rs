//! Input–output model, parameter estimation and calibration for a
//! microwave↔optical converter built from a microwave cavity strongly
//! coupled to a ferromagnetic Kittel mode.
//!
//! Every routine is generic over [`Real`] (`f32` or `f64`). The `f64`
//! aliases below cover the common case. Internally all rates and
//! frequencies are angular (rad/s); Hz appear only where noted.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod error;
pub mod features;
pub mod fitting;
pub mod lsq;
pub mod microscopic;
pub mod model;
pub mod optimizer;
pub mod scalar;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Params = model::SystemParams<f64>;
pub type Params32 = model::SystemParams<f32>;
pub type Detunings = model::Detunings<f64>;
pub type Geometry = microscopic::MaterialGeometry<f64>;
pub type Drive = microscopic::OpticalDriveParams<f64>;
pub type Bias = microscopic::FieldBias<f64>;
pub type Constants = units::Constants<f64>;
pub type Trace = fitting::SpectrumTrace<f64>;
pub type Fit = fitting::FitResult<f64>;
pub type Optimum = optimizer::OptimumReport<f64>;
pub type Grid = sweep::SweepGrid<f64>;
