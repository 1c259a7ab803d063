//! Streaming prediction-interval estimator.
//!
//! An [`Estimator`] is trained once on a batch of history and then runs
//! indefinitely on the live stream. Per step it does two things, strictly
//! in this order:
//!
//! 1. **estimate** — cut the histogram of the *current* regime at the
//!    requested confidence levels, yielding one interval per level for the
//!    next reading;
//! 2. **observe** — fold the realized reading into that histogram with a
//!    forgetting update and advance the regime label.
//!
//! Estimation therefore never sees the value it predicts, and training
//! cost per sample is independent of how long the stream has been running.
//!
//! Two variants share this loop. [`Variant::Absolute`] histograms the
//! power readings themselves; [`Variant::Differential`] histograms the
//! step-to-step increments and anchors each interval at the last reading,
//! which keeps intervals tight when the signal dwells on plateaus
//! separated by rare jumps.

use crate::cluster::{ClusterModel, FeatureSpec};
use crate::domain::QuantizedDomain;
use crate::error::{Error, Result};
use crate::histogram::{DiscreteCdf, ForgettingConfig, ForgettingHistogram};
use crate::scalar::Real;
use crate::series::TimeSeries;

/// What the per-regime histograms represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Histograms over absolute power readings ("model A").
    Absolute,
    /// Histograms over consecutive-reading increments, with intervals
    /// anchored at the last absolute reading ("model B").
    Differential,
}

impl Variant {
    /// Short display form, `A` or `B`.
    pub fn letter(&self) -> char {
        match self {
            Variant::Absolute => 'A',
            Variant::Differential => 'B',
        }
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Training-time configuration of an [`Estimator`].
///
/// The sampling period is not part of the config: it is taken from the
/// training series, and the forgetting factor is derived from it together
/// with `forgetting_time_s`, so retraining the same config on data sampled
/// at a different rate keeps the same wall-clock memory horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Absolute readings or increments.
    pub variant: Variant,
    /// Number of operating regimes (k-means clusters).
    pub clusters: usize,
    /// Forgetting time constant in seconds; larger keeps history longer.
    pub forgetting_time_s: f64,
    /// Number of histogram bins.
    pub domain_bins: usize,
    /// Fraction of the training range added beyond the observed extremes
    /// when fixing the histogram domain.
    pub domain_margin: f64,
    /// Which features drive regime identification.
    pub features: FeatureSpec,
    /// Use only the most recent N training samples (`None` = all).
    pub training_window: Option<usize>,
    /// Seed for the clustering initialization.
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Absolute,
            clusters: 1,
            forgetting_time_s: 3600.0,
            domain_bins: 2000,
            domain_margin: 0.2,
            features: FeatureSpec::POWER,
            training_window: None,
            seed: 42,
        }
    }
}

impl EstimatorConfig {
    fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::InvalidParameter {
                what: "cluster count",
                why: "must be at least 1".into(),
            });
        }
        if self.domain_bins < 2 {
            return Err(Error::InvalidParameter {
                what: "domain bins",
                why: format!("must be at least 2, got {}", self.domain_bins),
            });
        }
        if !(self.domain_margin.is_finite() && self.domain_margin >= 0.0) {
            return Err(Error::InvalidParameter {
                what: "domain margin",
                why: format!("must be a finite non-negative fraction, got {}", self.domain_margin),
            });
        }
        self.features.validate()
    }
}

/// One prediction interval: the next reading lies in `[lower, upper]` with
/// probability `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pi<F: Real> {
    pub alpha: F,
    pub lower: F,
    pub upper: F,
}

impl<F: Real> Pi<F> {
    /// Interval width.
    pub fn width(&self) -> F {
        self.upper - self.lower
    }

    /// Whether `value` is covered (bounds inclusive).
    pub fn covers(&self, value: F) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Most recent stream sample and its regime label.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LastSample<F: Real> {
    timestamp_ms: i64,
    power: F,
    label: usize,
}

/// Cluster-conditioned forgetting-histogram estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator<F: Real> {
    config: EstimatorConfig,
    /// Sampling period the estimator was trained at, in milliseconds.
    period_ms: i64,
    /// Forgetting factor derived from the period and the forgetting time.
    forgetting_factor: F,
    clusters: ClusterModel<F>,
    histograms: Vec<ForgettingHistogram<F>>,
    /// Default PI-width normalization constant: the largest absolute power
    /// seen in training (1 if the training data was identically zero).
    nominal_power: F,
    last: Option<LastSample<F>>,
}

impl<F: Real> Estimator<F> {
    /// Trains a fresh estimator on uniformly sampled history.
    ///
    /// Fits regime clusters and the histogram domain on the (windowed)
    /// history, then seeds each regime's histogram with the training
    /// successors of that regime: for every consecutive pair, the earlier
    /// sample selects the regime and the later sample (or the increment
    /// between them) is the seeded value.
    ///
    /// # Errors
    ///
    /// Fails on invalid configuration or when the windowed history holds
    /// fewer than `max(clusters, 2)` samples.
    pub fn batch_train(config: &EstimatorConfig, history: &TimeSeries<F>) -> Result<Self> {
        config.validate()?;
        let forgetting = ForgettingConfig::new(history.period_s(), config.forgetting_time_s)?;

        let window = config.training_window.unwrap_or(usize::MAX);
        let keep = window.min(history.len());
        let skip = history.len() - keep;
        let needed = config.clusters.max(2);
        if keep < needed {
            return Err(Error::TooFewSamples { needed, got: keep });
        }

        let samples: Vec<(i64, F)> = (skip..history.len())
            .map(|i| (history.timestamp_ms(i), history.values()[i]))
            .collect();
        let clusters =
            ClusterModel::fit(&samples, config.features, config.clusters, config.seed)?;

        let mut lo = F::infinity();
        let mut hi = F::neg_infinity();
        for &(_, v) in &samples {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }

        // Bucket each pair's successor value under the regime of the
        // earlier sample; the histogram domain is fitted to these values
        // (raw powers or increments, whichever the variant records), then
        // every regime histogram is seeded in one batch.
        let mut buckets: Vec<Vec<F>> = vec![Vec::new(); config.clusters];
        let mut max_increment = F::zero();
        for pair in samples.windows(2) {
            let (ts, power) = pair[0];
            let (_, next) = pair[1];
            let label = clusters.assign_label(power, ts);
            let value = match config.variant {
                Variant::Absolute => next,
                Variant::Differential => next - power,
            };
            if value.abs() > max_increment {
                max_increment = value.abs();
            }
            buckets[label].push(value);
        }
        let domain = fit_domain(config, lo, hi, max_increment)?;
        let mut histograms = Vec::with_capacity(config.clusters);
        for bucket in &buckets {
            let mut h = ForgettingHistogram::new(domain);
            h.seed_batch(bucket)?;
            histograms.push(h);
        }

        let (last_ts, last_power) = samples[samples.len() - 1];
        let last = LastSample {
            timestamp_ms: last_ts,
            power: last_power,
            label: clusters.assign_label(last_power, last_ts),
        };

        let magnitude = lo.abs().max(hi.abs());
        let nominal_power = if magnitude > F::zero() {
            magnitude
        } else {
            F::one()
        };

        Ok(Self {
            config: config.clone(),
            period_ms: history.period_ms(),
            forgetting_factor: F::from_config(forgetting.phi()),
            clusters,
            histograms,
            nominal_power,
            last: Some(last),
        })
    }

    /// Assembles an estimator around a pre-fitted cluster model with empty
    /// histograms and no stream state.
    ///
    /// The result is valid but cold: [`Estimator::estimate`] fails with
    /// [`Error::NotReady`] until the first observation arrives. Useful when
    /// regimes are known ahead of data, and as the identity case for
    /// persistence round-trips.
    ///
    /// # Errors
    ///
    /// Fails on invalid configuration or when the cluster model's size does
    /// not match `config.clusters`.
    pub fn with_model(
        config: &EstimatorConfig,
        period_ms: i64,
        clusters: ClusterModel<F>,
        domain: QuantizedDomain<F>,
    ) -> Result<Self> {
        config.validate()?;
        if clusters.len() != config.clusters {
            return Err(Error::InvalidParameter {
                what: "cluster model",
                why: format!(
                    "has {} centroids but the config asks for {}",
                    clusters.len(),
                    config.clusters
                ),
            });
        }
        if period_ms <= 0 {
            return Err(Error::InvalidParameter {
                what: "sampling period",
                why: format!("must be positive, got {period_ms} ms"),
            });
        }
        let forgetting = ForgettingConfig::new(period_ms as f64 / 1000.0, config.forgetting_time_s)?;
        let histograms = (0..config.clusters)
            .map(|_| ForgettingHistogram::new(domain))
            .collect();
        Ok(Self {
            config: config.clone(),
            period_ms,
            forgetting_factor: F::from_config(forgetting.phi()),
            clusters,
            histograms,
            nominal_power: F::one(),
            last: None,
        })
    }

    /// The configuration the estimator was trained with.
    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Sampling period the estimator expects, in milliseconds.
    pub fn period_ms(&self) -> i64 {
        self.period_ms
    }

    /// Derived forgetting factor, strictly inside (0, 1).
    pub fn forgetting_factor(&self) -> F {
        self.forgetting_factor
    }

    /// The fitted regime model.
    pub fn cluster_model(&self) -> &ClusterModel<F> {
        &self.clusters
    }

    /// Histogram of regime `label`.
    ///
    /// # Panics
    ///
    /// Panics if `label >= config.clusters`.
    pub fn histogram(&self, label: usize) -> &ForgettingHistogram<F> {
        &self.histograms[label]
    }

    /// The quantization grid shared by all regime histograms.
    pub fn domain(&self) -> &QuantizedDomain<F> {
        self.histograms[0].domain()
    }

    /// Training-derived normalization constant for interval widths.
    pub fn nominal_power(&self) -> F {
        self.nominal_power
    }

    /// Timestamp of the most recent sample, if any.
    pub fn last_timestamp_ms(&self) -> Option<i64> {
        self.last.as_ref().map(|l| l.timestamp_ms)
    }

    /// Most recent power reading, if any.
    pub fn last_power(&self) -> Option<F> {
        self.last.as_ref().map(|l| l.power)
    }

    /// Regime label of the most recent sample, if any.
    pub fn last_label(&self) -> Option<usize> {
        self.last.as_ref().map(|l| l.label)
    }

    /// Prediction interval for the next reading at confidence `alpha`.
    ///
    /// Cuts the current regime's histogram CDF at `(1 - alpha)/2` and
    /// `(1 + alpha)/2`. If the current regime's histogram is still empty,
    /// the mixture of all non-empty regime histograms stands in; if every
    /// histogram is empty, the interval falls back to the whole domain —
    /// maximally conservative but well defined.
    ///
    /// When several confidence levels are needed against the same state,
    /// prefer [`Estimator::step`] or [`Estimator::estimate_all`], which
    /// build the CDF once.
    ///
    /// # Errors
    ///
    /// [`Error::NotReady`] before any sample has been observed, and
    /// [`Error::InvalidAlpha`] for `alpha` outside (0, 1).
    pub fn estimate(&self, alpha: F) -> Result<(F, F)> {
        let pis = self.estimate_all(&[alpha])?;
        Ok((pis[0].lower, pis[0].upper))
    }

    /// Prediction intervals for several confidence levels against the same
    /// state, building the CDF once.
    ///
    /// # Errors
    ///
    /// Same conditions as [`Estimator::estimate`].
    pub fn estimate_all(&self, alphas: &[F]) -> Result<Vec<Pi<F>>> {
        let last = self.last.as_ref().ok_or(Error::NotReady)?;
        let anchor = match self.config.variant {
            Variant::Absolute => F::zero(),
            Variant::Differential => last.power,
        };
        let source = self.pi_source(last.label)?;
        let mut out = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let (lower, upper) = match &source {
                PiSource::Cdf(cdf) => cdf.quantile_pair(alpha)?,
                PiSource::FullDomain => {
                    if !(alpha > F::zero() && alpha < F::one()) {
                        return Err(Error::InvalidAlpha {
                            alpha: alpha.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    (self.domain().p_min(), self.domain().p_max())
                }
            };
            out.push(Pi {
                alpha,
                lower: anchor + lower,
                upper: anchor + upper,
            });
        }
        Ok(out)
    }

    /// Folds a realized reading into the model: updates the current
    /// regime's histogram with the reading (or its increment) and advances
    /// the regime label.
    ///
    /// The first observation on a cold estimator only establishes stream
    /// state; there is no previous sample to form an update from.
    ///
    /// # Errors
    ///
    /// Rejects non-finite readings and timestamps that do not advance.
    pub fn observe(&mut self, timestamp_ms: i64, power: F) -> Result<()> {
        if !power.is_finite() {
            return Err(Error::NonFinite {
                what: "power reading",
                value: power.to_f64().unwrap_or(f64::NAN),
            });
        }
        if let Some(last) = self.last {
            if timestamp_ms <= last.timestamp_ms {
                return Err(Error::NonMonotonicTimestamp {
                    got_ms: timestamp_ms,
                    last_ms: last.timestamp_ms,
                });
            }
            let value = match self.config.variant {
                Variant::Absolute => power,
                Variant::Differential => power - last.power,
            };
            self.histograms[last.label].decay_update(value, self.forgetting_factor)?;
        }
        self.last = Some(LastSample {
            timestamp_ms,
            power,
            label: self.clusters.assign_label(power, timestamp_ms),
        });
        Ok(())
    }

    /// One full stream step: intervals *first*, then the observation.
    ///
    /// Emits the prediction intervals for this reading based purely on
    /// earlier data, then folds the reading in. This is the one-step-ahead
    /// loop used by backtests and live streaming.
    ///
    /// # Errors
    ///
    /// All conditions of [`Estimator::estimate_all`] and
    /// [`Estimator::observe`]; the estimator is left unchanged on error.
    pub fn step(&mut self, timestamp_ms: i64, power: F, alphas: &[F]) -> Result<Vec<Pi<F>>> {
        // Validate the observation up front so a failed step has no effect.
        if !power.is_finite() {
            return Err(Error::NonFinite {
                what: "power reading",
                value: power.to_f64().unwrap_or(f64::NAN),
            });
        }
        if let Some(last) = &self.last {
            if timestamp_ms <= last.timestamp_ms {
                return Err(Error::NonMonotonicTimestamp {
                    got_ms: timestamp_ms,
                    last_ms: last.timestamp_ms,
                });
            }
        }
        let pis = self.estimate_all(alphas)?;
        self.observe(timestamp_ms, power)
            .expect("observation was validated before estimating");
        Ok(pis)
    }

    /// Distribution serving the next interval: the current regime's
    /// histogram, or the mixture of all non-empty histograms, or the whole
    /// domain when no data exists at all.
    fn pi_source(&self, label: usize) -> Result<PiSource<F>> {
        let hist = &self.histograms[label];
        if !hist.is_empty() {
            return Ok(PiSource::Cdf(hist.cdf()?));
        }
        let domain = *self.domain();
        let mut mixture = vec![F::zero(); domain.n_bins()];
        let mut contributors = 0usize;
        for h in &self.histograms {
            if h.is_empty() {
                continue;
            }
            contributors += 1;
            for (k, slot) in mixture.iter_mut().enumerate() {
                *slot = *slot + h.normalized_mass(k);
            }
        }
        if contributors == 0 {
            return Ok(PiSource::FullDomain);
        }
        let union = ForgettingHistogram::from_weights(domain, mixture)?;
        Ok(PiSource::Cdf(union.cdf()?))
    }

    /// Deconstructs the estimator for persistence.
    pub(crate) fn parts(&self) -> EstimatorParts<'_, F> {
        EstimatorParts {
            config: &self.config,
            period_ms: self.period_ms,
            clusters: &self.clusters,
            histograms: &self.histograms,
            nominal_power: self.nominal_power,
            last: self.last.map(|l| (l.timestamp_ms, l.power, l.label)),
        }
    }

    /// Rebuilds an estimator from persisted state, bit-for-bit.
    pub(crate) fn from_parts(
        config: EstimatorConfig,
        period_ms: i64,
        clusters: ClusterModel<F>,
        histograms: Vec<ForgettingHistogram<F>>,
        nominal_power: F,
        last: Option<(i64, F, usize)>,
    ) -> Result<Self> {
        config.validate()?;
        if clusters.len() != config.clusters || histograms.len() != config.clusters {
            return Err(Error::SnapshotFormat {
                why: format!(
                    "config asks for {} regimes but snapshot holds {} centroids / {} histograms",
                    config.clusters,
                    clusters.len(),
                    histograms.len()
                ),
            });
        }
        if let Some((_, _, label)) = last {
            if label >= config.clusters {
                return Err(Error::SnapshotFormat {
                    why: format!("last-sample label {label} out of {} regimes", config.clusters),
                });
            }
        }
        let forgetting = ForgettingConfig::new(period_ms as f64 / 1000.0, config.forgetting_time_s)?;
        Ok(Self {
            config,
            period_ms,
            forgetting_factor: F::from_config(forgetting.phi()),
            clusters,
            histograms,
            nominal_power,
            last: last.map(|(timestamp_ms, power, label)| LastSample {
                timestamp_ms,
                power,
                label,
            }),
        })
    }
}

/// Borrowed view of an estimator's complete state, for persistence.
pub(crate) struct EstimatorParts<'a, F: Real> {
    pub config: &'a EstimatorConfig,
    pub period_ms: i64,
    pub clusters: &'a ClusterModel<F>,
    pub histograms: &'a [ForgettingHistogram<F>],
    pub nominal_power: F,
    pub last: Option<(i64, F, usize)>,
}

enum PiSource<F: Real> {
    Cdf(DiscreteCdf<F>),
    FullDomain,
}

/// Chooses the histogram grid from the training extremes.
///
/// * Absolute: the observed power range extended by `domain_margin` on
///   each side.
/// * Differential: symmetric about zero, spanning the largest training
///   increment plus margin, with the bin count rounded up to odd so that a
///   zero increment is exactly representable — streams dwell at constant
///   power often enough that "no change" deserves an exact bin. Sizing the
///   grid to the increments rather than the power range matters: a slowly
///   wandering level can occupy a range thousands of times wider than any
///   single step, and spreading the bins over that range would starve the
///   increment distribution of resolution (larger steps simply clamp into
///   the edge bins, exactly as out-of-range powers do for Absolute).
///
/// Degenerate training data (a constant series, hence zero range and zero
/// increments) falls back to a symmetric pad — around the constant for
/// Absolute, one watt around zero for Differential — again with an odd bin
/// count so the resting value sits on the grid.
fn fit_domain<F: Real>(
    config: &EstimatorConfig,
    lo: F,
    hi: F,
    max_increment: F,
) -> Result<QuantizedDomain<F>> {
    let margin = F::from_config(config.domain_margin);
    let range = hi - lo;
    let odd_bins = config.domain_bins | 1;
    match config.variant {
        Variant::Absolute => {
            if range > F::zero() {
                let pad = margin * range;
                QuantizedDomain::new(lo - pad, hi + pad, config.domain_bins)
            } else {
                let pad = constant_pad(lo);
                QuantizedDomain::new(lo - pad, lo + pad, odd_bins)
            }
        }
        Variant::Differential => {
            let span = if max_increment > F::zero() {
                max_increment * (F::one() + margin)
            } else {
                F::one()
            };
            QuantizedDomain::new(-span, span, odd_bins)
        }
    }
}

/// Pad used when the training data is a single constant level `c`: a fifth
/// of its magnitude, but at least one watt.
fn constant_pad<F: Real>(c: F) -> F {
    let fifth = c.abs() * F::from_config(0.2);
    fifth.max(F::one())
}
