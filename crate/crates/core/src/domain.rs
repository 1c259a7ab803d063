//! Fixed quantization grid over a power (or power-difference) range.
//!
//! A [`QuantizedDomain`] is the discrete support shared by all histograms
//! of one estimator: `n_bins` equally spaced representable values from
//! `p_min` to `p_max` inclusive. Continuous readings are snapped to the
//! nearest grid value; readings outside the range clamp to the first or
//! last bin, so no update is ever dropped.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Evenly spaced grid of representable values, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedDomain<F: Real> {
    p_min: F,
    p_max: F,
    n_bins: usize,
    delta: F,
}

impl<F: Real> QuantizedDomain<F> {
    /// Builds a grid spanning `[p_min, p_max]` with `n_bins` values.
    ///
    /// # Errors
    ///
    /// Rejects non-finite bounds, `p_min >= p_max`, and `n_bins < 2`.
    pub fn new(p_min: F, p_max: F, n_bins: usize) -> Result<Self> {
        if !p_min.is_finite() || !p_max.is_finite() || p_min >= p_max || n_bins < 2 {
            return Err(Error::InvalidDomain {
                p_min: p_min.to_f64().unwrap_or(f64::NAN),
                p_max: p_max.to_f64().unwrap_or(f64::NAN),
                n_bins,
            });
        }
        let span = p_max - p_min;
        let delta = span / F::from_config((n_bins - 1) as f64);
        if !delta.is_finite() || delta <= F::zero() {
            return Err(Error::InvalidDomain {
                p_min: p_min.to_f64().unwrap_or(f64::NAN),
                p_max: p_max.to_f64().unwrap_or(f64::NAN),
                n_bins,
            });
        }
        Ok(Self {
            p_min,
            p_max,
            n_bins,
            delta,
        })
    }

    /// Lowest representable value.
    #[inline]
    pub fn p_min(&self) -> F {
        self.p_min
    }

    /// Highest representable value.
    #[inline]
    pub fn p_max(&self) -> F {
        self.p_max
    }

    /// Number of grid values.
    #[inline]
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Spacing between adjacent grid values.
    #[inline]
    pub fn delta(&self) -> F {
        self.delta
    }

    /// Representable value of bin `k`.
    ///
    /// The endpoints are anchored exactly: `bin_value(0)` returns `p_min`
    /// and `bin_value(n_bins - 1)` returns `p_max` bit-for-bit, so clamping
    /// and quantile extraction at the edges reproduce the configured range
    /// without rounding residue.
    ///
    /// # Panics
    ///
    /// Panics if `k >= n_bins`.
    #[inline]
    pub fn bin_value(&self, k: usize) -> F {
        assert!(k < self.n_bins, "bin index {k} out of {} bins", self.n_bins);
        if k == self.n_bins - 1 {
            self.p_max
        } else {
            self.p_min + F::from_config(k as f64) * self.delta
        }
    }

    /// Index of the grid value nearest to `value`.
    ///
    /// Values at or below `p_min` map to bin 0, values at or above `p_max`
    /// map to the last bin. A value exactly halfway between two grid points
    /// rounds to the higher index.
    ///
    /// # Errors
    ///
    /// Rejects NaN and infinite values.
    #[inline]
    pub fn quantize(&self, value: F) -> Result<usize> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "value to quantize",
                value: value.to_f64().unwrap_or(f64::NAN),
            });
        }
        if value <= self.p_min {
            return Ok(0);
        }
        if value >= self.p_max {
            return Ok(self.n_bins - 1);
        }
        // Offset is strictly positive here, so round-half-away-from-zero
        // sends midpoints to the higher bin index.
        let offset = ((value - self.p_min) / self.delta).round();
        let k = offset
            .to_usize()
            .expect("in-range offset converts to a bin index");
        Ok(k.min(self.n_bins - 1))
    }
}
