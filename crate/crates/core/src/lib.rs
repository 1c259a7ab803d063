//! Streaming prediction intervals for electrical power prosumption.
//!
//! This crate estimates ultra-short-term prediction intervals (PIs) for a
//! stream of power readings. The model keeps one empirical histogram with
//! exponential forgetting per operating regime; regimes are identified by
//! k-means clustering of simple features (power level, time of day). At
//! every step the estimator answers "the next reading lies in `[lower,
//! upper]` with probability `alpha`" by cutting the current histogram's
//! CDF, then folds the realized reading back into the histogram — training
//! is O(1) per sample and never stops.
//!
//! # Quick start
//!
//! ```
//! use ustpi::{Estimator, EstimatorConfig, TimeSeries, Variant};
//!
//! // A 50 Hz stream that hovers around 1 kW and sometimes jumps to 5 kW.
//! let values: Vec<f64> = (0..5_000)
//!     .map(|i| if (i / 500) % 2 == 0 { 1_000.0 } else { 5_000.0 })
//!     .collect();
//! let history = TimeSeries::new(0, 20, values).unwrap();
//!
//! let config = EstimatorConfig {
//!     variant: Variant::Differential,
//!     clusters: 2,
//!     forgetting_time_s: 60.0,
//!     ..EstimatorConfig::default()
//! };
//! let mut estimator = Estimator::batch_train(&config, &history).unwrap();
//!
//! // One-step-ahead interval, then fold in the realized value.
//! let intervals = estimator.step(100_000, 1_002.5, &[0.99]).unwrap();
//! assert!(intervals[0].lower <= intervals[0].upper);
//! ```
//!
//! The `f64` instantiations used throughout the docs are re-exported as
//! type aliases at the crate root; all structures are also usable with
//! `f32` via the [`Real`] scalar trait.

mod cluster;
mod domain;
mod error;
mod estimator;
mod evaluation;
mod histogram;
mod scalar;
mod series;
mod snapshot;
mod synth;

pub use cluster::{time_of_day_s, ClusterModel, FeatureMap, FeatureSpec, Standardizer};
pub use domain::QuantizedDomain;
pub use error::{Error, ErrorKind, Result};
pub use estimator::{Estimator, EstimatorConfig, Pi, Variant};
pub use evaluation::{
    backtest, cwc, default_mu, downsample, evaluate, picp, pinaw, rank_by_cwc, sweep,
    windowed_error_rates, AlphaMetrics, BacktestRecord, EvaluationReport, SweepGrid, SweepKey,
    SweepOutcome, SweepParams,
};
pub use histogram::{DiscreteCdf, ForgettingConfig, ForgettingHistogram};
pub use scalar::Real;
pub use series::{read_csv, write_csv, TimeSeries};
pub use snapshot::{load_snapshot, save_snapshot};
pub use synth::{generate, SyntheticProfile};

/// Double-precision quantization grid (the default instantiation).
pub type Domain64 = QuantizedDomain<f64>;
/// Double-precision forgetting histogram.
pub type Histogram64 = ForgettingHistogram<f64>;
/// Double-precision cumulative view.
pub type Cdf64 = DiscreteCdf<f64>;
/// Double-precision estimator.
pub type Estimator64 = Estimator<f64>;
/// Double-precision uniformly sampled series.
pub type Series64 = TimeSeries<f64>;
