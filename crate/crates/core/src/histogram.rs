//! Empirical histograms with exponential forgetting.
//!
//! A [`ForgettingHistogram`] is a discrete probability mass function over a
//! [`QuantizedDomain`]. It supports two kinds of updates:
//!
//! * **batch seeding** — every value in a training batch contributes equal
//!   weight, producing the initial distribution;
//! * **forgetting updates** — each new observation multiplies all existing
//!   mass by a forgetting factor `phi` in (0, 1) and places the remaining
//!   `1 - phi` on the observation's bin, so the histogram tracks a
//!   geometrically weighted moving distribution.
//!
//! The decayed mass is *not* rewritten bin by bin. A single lazy scale
//! factor absorbs the repeated multiplications, making each forgetting
//! update O(1); the scale is folded back into the weights only when it
//! approaches underflow, which costs O(n_bins) once every few million
//! updates. Quantile extraction goes through a [`DiscreteCdf`], an
//! immutable cumulative view that answers each interval query with two
//! binary searches.

use crate::domain::QuantizedDomain;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sampling and forgetting periods from which the forgetting factor is
/// derived.
///
/// A first-order forgetting time constant `forgetting_time_s`, discretized
/// at the sampling period `sample_period_s`, yields
/// `phi = r / (r + 1)` with `r = forgetting_time_s / sample_period_s`.
/// At a 0.02 s period and a 1 s forgetting time, `phi = 50/51`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgettingConfig {
    /// Spacing of incoming samples, in seconds.
    pub sample_period_s: f64,
    /// Forgetting time constant, in seconds. Larger values retain history
    /// longer.
    pub forgetting_time_s: f64,
}

impl ForgettingConfig {
    /// Validates both periods and builds the config.
    ///
    /// # Errors
    ///
    /// Rejects non-finite or non-positive periods.
    pub fn new(sample_period_s: f64, forgetting_time_s: f64) -> Result<Self> {
        if !(sample_period_s.is_finite() && sample_period_s > 0.0) {
            return Err(Error::InvalidParameter {
                what: "sample period",
                why: format!("must be a positive number of seconds, got {sample_period_s}"),
            });
        }
        if !(forgetting_time_s.is_finite() && forgetting_time_s > 0.0) {
            return Err(Error::InvalidParameter {
                what: "forgetting time",
                why: format!("must be a positive number of seconds, got {forgetting_time_s}"),
            });
        }
        // Keep the derived factor representable and strictly inside (0, 1):
        // a ratio beyond these bounds rounds phi to exactly 0 or 1, which
        // would make every forgetting update degenerate.
        let ratio = forgetting_time_s / sample_period_s;
        if !(1e-12..=1e15).contains(&ratio) {
            return Err(Error::InvalidParameter {
                what: "forgetting time",
                why: format!(
                    "ratio of forgetting time to sample period must lie in [1e-12, 1e15], got {ratio:e}"
                ),
            });
        }
        Ok(Self {
            sample_period_s,
            forgetting_time_s,
        })
    }

    /// Forgetting factor implied by the two periods, strictly inside (0, 1).
    ///
    /// Rescaling the sample period while keeping the forgetting time fixed
    /// preserves the memory horizon in wall-clock terms: the factor is
    /// recomputed from the ratio of the two periods.
    #[inline]
    pub fn phi(&self) -> f64 {
        let r = self.forgetting_time_s / self.sample_period_s;
        r / (r + 1.0)
    }

    /// Same config at a different sampling period (used after downsampling).
    pub fn with_sample_period(&self, sample_period_s: f64) -> Result<Self> {
        Self::new(sample_period_s, self.forgetting_time_s)
    }
}

/// Discrete PDF over a quantization grid with exponential forgetting.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingHistogram<F: Real> {
    domain: QuantizedDomain<F>,
    /// Raw bin weights; the physical weight of bin `k` is `weights[k] * scale`.
    weights: Vec<F>,
    /// Sum of physical weights, maintained incrementally (1 after any update).
    total_weight: F,
    /// Lazy decay multiplier applied to all of `weights`.
    scale: F,
    /// Number of samples incorporated (batch values plus forgetting updates).
    update_count: u64,
}

impl<F: Real> ForgettingHistogram<F> {
    /// Creates an empty histogram over `domain`.
    pub fn new(domain: QuantizedDomain<F>) -> Self {
        Self {
            domain,
            weights: vec![F::zero(); domain.n_bins()],
            total_weight: F::zero(),
            scale: F::one(),
            update_count: 0,
        }
    }

    /// Builds a histogram directly from raw bin weights.
    ///
    /// Used to reconstruct state from snapshots and to form mixtures of
    /// histograms; also convenient for tests. Weights must be finite and
    /// non-negative. An all-zero weight vector yields an empty histogram.
    ///
    /// # Errors
    ///
    /// Rejects a weight vector whose length differs from the domain's bin
    /// count and any negative or non-finite weight.
    pub fn from_weights(domain: QuantizedDomain<F>, weights: Vec<F>) -> Result<Self> {
        if weights.len() != domain.n_bins() {
            return Err(Error::InvalidParameter {
                what: "weight vector",
                why: format!(
                    "length {} does not match the domain's {} bins",
                    weights.len(),
                    domain.n_bins()
                ),
            });
        }
        let mut total = F::zero();
        for &w in &weights {
            if !w.is_finite() || w < F::zero() {
                return Err(Error::NonFinite {
                    what: "bin weight",
                    value: w.to_f64().unwrap_or(f64::NAN),
                });
            }
            total = total + w;
        }
        Ok(Self {
            domain,
            weights,
            total_weight: total,
            scale: F::one(),
            // No samples were incorporated; the mass came in as-is.
            update_count: 0,
        })
    }

    /// The quantization grid this histogram lives on.
    #[inline]
    pub fn domain(&self) -> &QuantizedDomain<F> {
        &self.domain
    }

    /// True until the first batch value or forgetting update arrives.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.total_weight <= F::zero()
    }

    /// Sum of physical bin weights (0 when empty, 1 after any update, up to
    /// floating-point drift).
    #[inline]
    pub fn total_weight(&self) -> F {
        self.total_weight
    }

    /// Current lazy decay multiplier. Exposed for persistence; always in
    /// `(0, 1]`.
    #[inline]
    pub fn scale(&self) -> F {
        self.scale
    }

    /// Number of samples incorporated so far.
    #[inline]
    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Raw (scale-relative) bin weights. Exposed for persistence.
    #[inline]
    pub fn raw_weights(&self) -> &[F] {
        &self.weights
    }

    /// Reconstructs a histogram from persisted state without renormalizing,
    /// so a restored instance continues bit-for-bit where the saved one
    /// stopped.
    pub(crate) fn from_parts(
        domain: QuantizedDomain<F>,
        weights: Vec<F>,
        total_weight: F,
        scale: F,
        update_count: u64,
    ) -> Result<Self> {
        if weights.len() != domain.n_bins() {
            return Err(Error::SnapshotFormat {
                why: format!(
                    "histogram has {} weights for a {}-bin domain",
                    weights.len(),
                    domain.n_bins()
                ),
            });
        }
        if !(scale.is_finite() && scale > F::zero() && scale <= F::one()) {
            return Err(Error::SnapshotFormat {
                why: format!("histogram scale {} outside (0, 1]", scale.to_f64().unwrap_or(f64::NAN)),
            });
        }
        Ok(Self {
            domain,
            weights,
            total_weight,
            scale,
            update_count,
        })
    }

    /// Normalized probability mass of bin `k`.
    ///
    /// Defined as `(weights[k] * scale) / total_weight`, and 0 for every bin
    /// of an empty histogram. This expression — in exactly this evaluation
    /// order — is the histogram's mass contract; cumulative views sum it
    /// left to right.
    #[inline]
    pub fn normalized_mass(&self, k: usize) -> F {
        if self.is_empty() {
            F::zero()
        } else {
            (self.weights[k] * self.scale) / self.total_weight
        }
    }

    /// Seeds a fresh histogram with a training batch.
    ///
    /// Every value is quantized onto the grid and contributes weight
    /// `1 / values.len()`, so the batch forms a normalized empirical
    /// distribution. Seeding an empty batch is a no-op. Subsequent
    /// forgetting updates decay this mass geometrically.
    ///
    /// # Errors
    ///
    /// Fails if the histogram has already been updated, or if any value is
    /// non-finite (the histogram is left untouched in that case).
    pub fn seed_batch(&mut self, values: &[F]) -> Result<()> {
        if self.update_count > 0 || !self.is_empty() {
            return Err(Error::AlreadySeeded);
        }
        if values.is_empty() {
            return Ok(());
        }
        let mut bins = Vec::with_capacity(values.len());
        for &v in values {
            bins.push(self.domain.quantize(v)?);
        }
        let share = F::one() / F::from_config(values.len() as f64);
        for bin in bins {
            self.weights[bin] = self.weights[bin] + share;
        }
        // Recompute the total in bin order so it matches an independent
        // left-to-right summation of the weights exactly.
        self.total_weight = self
            .weights
            .iter()
            .fold(F::zero(), |acc, &w| acc + w);
        self.update_count = values.len() as u64;
        Ok(())
    }

    /// Applies one forgetting update: existing mass is multiplied by
    /// `forgetting_factor`, and `1 - forgetting_factor` lands on the bin
    /// nearest `value`.
    ///
    /// The very first update of an empty histogram places mass 1 on the
    /// value's bin, so a histogram is a valid distribution from its first
    /// sample onward.
    ///
    /// # Errors
    ///
    /// Rejects non-finite values and factors outside (0, 1).
    pub fn decay_update(&mut self, value: F, forgetting_factor: F) -> Result<()> {
        if !(forgetting_factor > F::zero() && forgetting_factor < F::one()) {
            return Err(Error::InvalidParameter {
                what: "forgetting factor",
                why: format!(
                    "must lie strictly between 0 and 1, got {}",
                    forgetting_factor.to_f64().unwrap_or(f64::NAN)
                ),
            });
        }
        let bin = self.domain.quantize(value)?;
        if self.is_empty() {
            self.weights[bin] = F::one();
            self.total_weight = F::one();
            self.scale = F::one();
        } else {
            // Fold the scale into the weights *before* it would cross the
            // underflow threshold, so the multiply below never degrades.
            if self.scale * forgetting_factor < F::renorm_threshold() {
                self.flush_scale();
            }
            let fresh = F::one() - forgetting_factor;
            self.scale = self.scale * forgetting_factor;
            self.weights[bin] = self.weights[bin] + fresh / self.scale;
            self.total_weight = self.total_weight * forgetting_factor + fresh;
        }
        self.update_count += 1;
        Ok(())
    }

    /// Folds the lazy scale into the weights: `weights *= scale; scale = 1`.
    ///
    /// A pure change of representation — every physical bin weight is
    /// unchanged — executed automatically before the scale underflows;
    /// O(n_bins). The total is re-summed from the folded weights, clearing
    /// whatever drift the incremental bookkeeping accumulated since the
    /// last flush.
    fn flush_scale(&mut self) {
        let s = self.scale;
        for w in &mut self.weights {
            *w = *w * s;
        }
        self.scale = F::one();
        self.total_weight = self
            .weights
            .iter()
            .fold(F::zero(), |acc, &w| acc + w);
    }

    /// Immutable cumulative view for quantile queries.
    ///
    /// Costs O(n_bins) to build; each interval query on the result is then
    /// O(log n_bins), so one view can serve any number of confidence levels
    /// against the same histogram state.
    ///
    /// # Errors
    ///
    /// Fails on an empty histogram: with no data there is no distribution
    /// to query.
    pub fn cdf(&self) -> Result<DiscreteCdf<F>> {
        if self.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut acc = F::zero();
        for k in 0..self.weights.len() {
            acc = acc + self.normalized_mass(k);
            cumulative.push(acc);
        }
        Ok(DiscreteCdf {
            domain: self.domain,
            cumulative,
        })
    }

    /// Central prediction interval at confidence `alpha`; convenience for
    /// `self.cdf()?.quantile_pair(alpha)`.
    ///
    /// # Errors
    ///
    /// Fails on an empty histogram or an `alpha` outside (0, 1).
    pub fn quantile_pair(&self, alpha: F) -> Result<(F, F)> {
        self.cdf()?.quantile_pair(alpha)
    }
}

/// Immutable discrete CDF snapshot of a histogram.
///
/// `cumulative[k]` is the probability mass on bins `0..=k`; the sequence is
/// non-decreasing and ends at 1 up to floating-point drift. Queries are
/// read-only, so snapshots can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct DiscreteCdf<F: Real> {
    domain: QuantizedDomain<F>,
    cumulative: Vec<F>,
}

impl<F: Real> DiscreteCdf<F> {
    /// The grid the CDF is defined on.
    #[inline]
    pub fn domain(&self) -> &QuantizedDomain<F> {
        &self.domain
    }

    /// Cumulative mass at each bin.
    #[inline]
    pub fn values(&self) -> &[F] {
        &self.cumulative
    }

    /// Central interval `[lower, upper]` covering probability `alpha`.
    ///
    /// * `lower` is the smallest grid value whose cumulative mass reaches
    ///   `(1 - alpha) / 2`;
    /// * `upper` is the largest grid value whose cumulative mass does not
    ///   exceed `(1 + alpha) / 2`.
    ///
    /// Both searches are binary, exploiting the monotone cumulative
    /// sequence. When the upper set is empty or the two bounds cross —
    /// which happens when a single bin carries the bulk of the mass — the
    /// upper bound is clamped to the lower one, yielding a degenerate
    /// interval rather than an inverted pair.
    ///
    /// # Errors
    ///
    /// Rejects confidence levels outside the open interval (0, 1).
    pub fn quantile_pair(&self, alpha: F) -> Result<(F, F)> {
        if !(alpha > F::zero() && alpha < F::one()) {
            return Err(Error::InvalidAlpha {
                alpha: alpha.to_f64().unwrap_or(f64::NAN),
            });
        }
        let two = F::one() + F::one();
        let lo_threshold = (F::one() - alpha) / two;
        let hi_threshold = (F::one() + alpha) / two;

        // First bin whose cumulative mass reaches the lower threshold. The
        // final cumulative value is ~1 while the threshold is < 1/2, so the
        // search always lands on a valid bin.
        let lower_idx = self.cumulative.partition_point(|&c| c < lo_threshold);
        debug_assert!(lower_idx < self.cumulative.len());
        let lower_idx = lower_idx.min(self.cumulative.len() - 1);

        // One past the last bin whose cumulative mass is within the upper
        // threshold; an empty prefix means even the first bin overshoots.
        let past_upper = self.cumulative.partition_point(|&c| c <= hi_threshold);
        let upper_idx = if past_upper == 0 {
            lower_idx
        } else {
            (past_upper - 1).max(lower_idx)
        };

        Ok((
            self.domain.bin_value(lower_idx),
            self.domain.bin_value(upper_idx),
        ))
    }
}
