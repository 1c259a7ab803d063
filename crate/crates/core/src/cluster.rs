//! Operating-regime identification via k-means in feature space.
//!
//! Each power sample is mapped to a small feature vector — standardized
//! power level and/or standardized time of day — and k-means centroids
//! fitted on training data partition that space into regimes. At run time,
//! [`ClusterModel::assign_label`] picks the nearest centroid; the estimator
//! keeps one histogram per label. Centroids are frozen after fitting so a
//! label always refers to the same region of feature space, which keeps the
//! per-label histograms exchangeable over time.
//!
//! Fitting is deterministic: k-means++ seeding draws from a counter-based
//! RNG seeded explicitly, Lloyd iterations scan samples in input order, and
//! distance ties always resolve to the lowest centroid index.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Milliseconds per day, for the time-of-day feature.
const MS_PER_DAY: i64 = 86_400_000;

/// Upper bound on Lloyd iterations before fitting stops regardless of
/// convergence.
const MAX_LLOYD_ITERATIONS: usize = 100;

/// Which raw quantities enter the feature vector.
///
/// At least one feature must be enabled. Both features are standardized
/// with statistics fitted on training data, so their scales are comparable
/// regardless of the units of the raw stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    /// Include the instantaneous power reading.
    pub use_power: bool,
    /// Include the time of day, as seconds since midnight (UTC) mapped
    /// linearly onto a standardized axis.
    pub use_time_of_day: bool,
}

impl FeatureSpec {
    /// Power-only features (the common configuration).
    pub const POWER: Self = Self {
        use_power: true,
        use_time_of_day: false,
    };

    /// Power and time-of-day features.
    pub const POWER_AND_TIME: Self = Self {
        use_power: true,
        use_time_of_day: true,
    };

    /// Number of enabled features.
    pub fn arity(&self) -> usize {
        usize::from(self.use_power) + usize::from(self.use_time_of_day)
    }

    /// Validates that at least one feature is enabled.
    pub fn validate(&self) -> Result<()> {
        if self.arity() == 0 {
            return Err(Error::InvalidParameter {
                what: "feature spec",
                why: "at least one of power and time-of-day must be enabled".into(),
            });
        }
        Ok(())
    }

    /// Fits per-feature standardization statistics over training samples
    /// given as `(timestamp_ms, power)` pairs.
    ///
    /// # Errors
    ///
    /// Fails when no feature is enabled or `samples` is empty.
    pub fn fit<F: Real>(&self, samples: &[(i64, F)]) -> Result<FeatureMap<F>> {
        self.validate()?;
        if samples.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let power_norm = if self.use_power {
            Standardizer::fit(samples.iter().map(|&(_, p)| p), samples.len())
        } else {
            Standardizer::disabled()
        };
        let tod_norm = if self.use_time_of_day {
            Standardizer::fit(
                samples.iter().map(|&(ts, _)| time_of_day_s::<F>(ts)),
                samples.len(),
            )
        } else {
            Standardizer::disabled()
        };
        Ok(FeatureMap {
            spec: *self,
            power_norm,
            tod_norm,
        })
    }
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self::POWER
    }
}

/// Seconds since midnight (UTC) of an epoch-milliseconds timestamp, in
/// `[0, 86400)`. Midnight is taken in UTC so the mapping is a pure function
/// of the timestamp, independent of host configuration.
pub fn time_of_day_s<F: Real>(timestamp_ms: i64) -> F {
    let ms = timestamp_ms.rem_euclid(MS_PER_DAY);
    F::from_config(ms as f64 / 1000.0)
}

/// Affine standardization `x -> (x - mean) * inv_sd` for one feature.
///
/// A zero-variance feature stores `inv_sd = 0`, mapping every input to 0 —
/// a constant feature carries no information, and this keeps distances
/// finite instead of dividing by zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer<F: Real> {
    pub mean: F,
    pub inv_sd: F,
}

impl<F: Real> Standardizer<F> {
    fn disabled() -> Self {
        Self {
            mean: F::zero(),
            inv_sd: F::zero(),
        }
    }

    fn fit(values: impl Iterator<Item = F> + Clone, n: usize) -> Self {
        let count = F::from_config(n as f64);
        let mean = values.clone().fold(F::zero(), |acc, v| acc + v) / count;
        let var = values.fold(F::zero(), |acc, v| {
            let d = v - mean;
            acc + d * d
        }) / count;
        let sd = var.sqrt();
        let inv_sd = if sd > F::zero() { F::one() / sd } else { F::zero() };
        Self { mean, inv_sd }
    }

    #[inline]
    fn apply(&self, x: F) -> F {
        (x - self.mean) * self.inv_sd
    }
}

/// Feature extraction with standardization statistics fitted on training
/// data.
///
/// Feature vectors are fixed two-slot arrays `[power_z, tod_z]`; a disabled
/// feature occupies its slot with a constant 0, which contributes nothing
/// to squared distances while keeping the hot path free of branching and
/// allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMap<F: Real> {
    spec: FeatureSpec,
    power_norm: Standardizer<F>,
    tod_norm: Standardizer<F>,
}

impl<F: Real> FeatureMap<F> {
    /// The feature selection this map was fitted for.
    pub fn spec(&self) -> FeatureSpec {
        self.spec
    }

    /// Fitted power standardization (exposed for persistence).
    pub fn power_norm(&self) -> Standardizer<F> {
        self.power_norm
    }

    /// Fitted time-of-day standardization (exposed for persistence).
    pub fn tod_norm(&self) -> Standardizer<F> {
        self.tod_norm
    }

    /// Rebuilds a map from persisted statistics.
    pub fn from_parts(
        spec: FeatureSpec,
        power_norm: Standardizer<F>,
        tod_norm: Standardizer<F>,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            power_norm,
            tod_norm,
        })
    }

    /// Standardized feature vector for one sample.
    #[inline]
    pub fn extract(&self, power: F, timestamp_ms: i64) -> [F; 2] {
        let p = if self.spec.use_power {
            self.power_norm.apply(power)
        } else {
            F::zero()
        };
        let t = if self.spec.use_time_of_day {
            self.tod_norm.apply(time_of_day_s(timestamp_ms))
        } else {
            F::zero()
        };
        [p, t]
    }
}

/// Fitted k-means model: feature mapping plus frozen centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<F: Real> {
    features: FeatureMap<F>,
    centroids: Vec<[F; 2]>,
}

impl<F: Real> ClusterModel<F> {
    /// Number of clusters (labels run from 0 to `len - 1`).
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    /// True only for a model with no centroids, which `fit` never produces.
    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// The fitted feature mapping.
    pub fn features(&self) -> &FeatureMap<F> {
        &self.features
    }

    /// Centroid coordinates in feature space (exposed for persistence).
    pub fn centroids(&self) -> &[[F; 2]] {
        &self.centroids
    }

    /// Rebuilds a model from persisted parts.
    pub fn from_parts(features: FeatureMap<F>, centroids: Vec<[F; 2]>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidParameter {
                what: "cluster model",
                why: "must contain at least one centroid".into(),
            });
        }
        Ok(Self {
            features,
            centroids,
        })
    }

    /// Label of the centroid nearest to the sample, by Euclidean distance
    /// in standardized feature space. Ties resolve to the lowest index.
    #[inline]
    pub fn assign_label(&self, power: F, timestamp_ms: i64) -> usize {
        let x = self.features.extract(power, timestamp_ms);
        nearest_centroid(&self.centroids, x)
    }

    /// Fits `clusters` centroids on training samples `(timestamp_ms, power)`
    /// with k-means++ seeding followed by Lloyd iterations.
    ///
    /// The fit is fully deterministic for a given `(samples, spec, clusters,
    /// seed)` tuple. Clusters left empty by an assignment round are
    /// re-seeded on the sample currently farthest from its centroid, so the
    /// model always ends with `clusters` meaningful centroids.
    ///
    /// # Errors
    ///
    /// Fails when `clusters` is zero, fewer samples than clusters are
    /// supplied, or the feature spec is invalid.
    pub fn fit(
        samples: &[(i64, F)],
        spec: FeatureSpec,
        clusters: usize,
        seed: u64,
    ) -> Result<Self> {
        if clusters == 0 {
            return Err(Error::InvalidParameter {
                what: "cluster count",
                why: "must be at least 1".into(),
            });
        }
        if samples.len() < clusters {
            return Err(Error::TooFewSamples {
                needed: clusters,
                got: samples.len(),
            });
        }
        let features = spec.fit(samples)?;
        let points: Vec<[F; 2]> = samples
            .iter()
            .map(|&(ts, p)| features.extract(p, ts))
            .collect();

        let mut centroids = seed_plus_plus(&points, clusters, seed);
        let mut assignment = vec![0usize; points.len()];
        let mut previous_objective = F::infinity();

        for _ in 0..MAX_LLOYD_ITERATIONS {
            // Assignment step.
            let mut changed = false;
            let mut objective = F::zero();
            for (i, &x) in points.iter().enumerate() {
                let label = nearest_centroid(&centroids, x);
                objective = objective + squared_distance(centroids[label], x);
                if assignment[i] != label {
                    assignment[i] = label;
                    changed = true;
                }
            }
            // Lloyd iterations never increase the within-cluster sum of
            // squares; allow a whisker of float noise.
            debug_assert!(
                objective <= previous_objective * (F::one() + F::from_config(1e-9))
                    + F::from_config(1e-12),
                "k-means objective increased: {previous_objective} -> {objective}"
            );
            previous_objective = objective;

            // Update step: means of assigned points.
            let mut sums = vec![[F::zero(); 2]; clusters];
            let mut counts = vec![0usize; clusters];
            for (i, &x) in points.iter().enumerate() {
                let l = assignment[i];
                sums[l][0] = sums[l][0] + x[0];
                sums[l][1] = sums[l][1] + x[1];
                counts[l] += 1;
            }
            for l in 0..clusters {
                if counts[l] > 0 {
                    let inv = F::one() / F::from_config(counts[l] as f64);
                    centroids[l] = [sums[l][0] * inv, sums[l][1] * inv];
                }
            }
            // Re-seed clusters that lost all members on the sample farthest
            // from its current centroid (deterministic; one sample per
            // empty cluster).
            let mut claimed: Vec<usize> = Vec::new();
            for l in 0..clusters {
                if counts[l] == 0 {
                    if let Some(far) = farthest_sample(&points, &centroids, &assignment, &claimed)
                    {
                        centroids[l] = points[far];
                        claimed.push(far);
                    }
                }
            }

            if !changed && claimed.is_empty() {
                break;
            }
        }

        Ok(Self {
            features,
            centroids,
        })
    }
}

#[inline]
fn squared_distance<F: Real>(a: [F; 2], b: [F; 2]) -> F {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    d0 * d0 + d1 * d1
}

/// Index of the centroid nearest to `x`; strict comparison keeps the first
/// (lowest-index) centroid on ties.
#[inline]
fn nearest_centroid<F: Real>(centroids: &[[F; 2]], x: [F; 2]) -> usize {
    let mut best = 0usize;
    let mut best_d = squared_distance(centroids[0], x);
    for (l, &c) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(c, x);
        if d < best_d {
            best = l;
            best_d = d;
        }
    }
    best
}

/// Sample with the greatest distance to its assigned centroid, excluding
/// indices already claimed by another re-seeded cluster.
fn farthest_sample<F: Real>(
    points: &[[F; 2]],
    centroids: &[[F; 2]],
    assignment: &[usize],
    claimed: &[usize],
) -> Option<usize> {
    let mut best: Option<(usize, F)> = None;
    for (i, &x) in points.iter().enumerate() {
        if claimed.contains(&i) {
            continue;
        }
        let d = squared_distance(centroids[assignment[i]], x);
        match best {
            Some((_, bd)) if d <= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
}

/// k-means++ seeding: first centroid uniform at random, the rest drawn with
/// probability proportional to squared distance from the nearest centroid
/// chosen so far.
fn seed_plus_plus<F: Real>(points: &[[F; 2]], clusters: usize, seed: u64) -> Vec<[F; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(clusters);
    let first = rng.random_range(0..points.len());
    centroids.push(points[first]);

    let mut nearest_d: Vec<F> = points
        .iter()
        .map(|&x| squared_distance(centroids[0], x))
        .collect();

    while centroids.len() < clusters {
        let total = nearest_d.iter().fold(F::zero(), |acc, &d| acc + d);
        let next = if total > F::zero() {
            // Inverse-CDF draw over the squared-distance weights.
            let u = F::from_config(rng.random::<f64>()) * total;
            let mut acc = F::zero();
            let mut chosen = points.len() - 1;
            for (i, &d) in nearest_d.iter().enumerate() {
                acc = acc + d;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass is zero: every point coincides with some
            // centroid already; spread deterministically.
            rng.random_range(0..points.len())
        };
        let c = points[next];
        centroids.push(c);
        for (i, &x) in points.iter().enumerate() {
            let d = squared_distance(c, x);
            if d < nearest_d[i] {
                nearest_d[i] = d;
            }
        }
    }
    centroids
}
