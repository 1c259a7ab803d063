//! Backtesting, interval-quality metrics, and parameter sweeps.
//!
//! A backtest replays a held-out series through [`Estimator::step`],
//! recording the intervals that were emitted *before* each reading was
//! revealed. Three standard metrics grade the result per confidence level:
//!
//! * **PINAW** — mean interval width, normalized by a nominal power, so
//!   narrower is better;
//! * **PICP** — empirical coverage, the fraction of readings inside their
//!   interval (bounds inclusive);
//! * **CWC** — width with an exponential penalty once coverage drops below
//!   the target, so configurations can be ranked on a single number.
//!
//! [`sweep`] grids those backtests over model variant, cluster count,
//! forgetting time, and sampling period (via [`downsample`]), running
//! rows in parallel but reporting them in deterministic grid order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{Estimator, EstimatorConfig, Pi, Variant};
use crate::scalar::Real;
use crate::series::TimeSeries;

/// One backtest step: the reading and the intervals emitted just before it.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRecord<F: Real> {
    pub timestamp_ms: i64,
    pub power: F,
    pub intervals: Vec<Pi<F>>,
}

/// Replays `test` through the estimator, one estimate-then-observe step per
/// sample, and returns the per-step records.
///
/// The estimator keeps learning during the replay, exactly as it would in
/// production. Pass a clone if the original must stay untouched.
///
/// # Errors
///
/// Fails when the test series' sampling period differs from the period the
/// estimator was trained at, when its timestamps do not continue past the
/// estimator's stream position, or on an empty `alphas` slice.
pub fn backtest<F: Real>(
    estimator: &mut Estimator<F>,
    test: &TimeSeries<F>,
    alphas: &[F],
) -> Result<Vec<BacktestRecord<F>>> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter {
            what: "confidence levels",
            why: "at least one alpha is required".into(),
        });
    }
    if test.period_ms() != estimator.period_ms() {
        return Err(Error::PeriodMismatch {
            expected_ms: estimator.period_ms(),
            found_ms: test.period_ms(),
        });
    }
    let mut records = Vec::with_capacity(test.len());
    for (timestamp_ms, power) in test.iter() {
        let intervals = estimator.step(timestamp_ms, power, alphas)?;
        records.push(BacktestRecord {
            timestamp_ms,
            power,
            intervals,
        });
    }
    Ok(records)
}

/// Looks up the position of `alpha` in the intervals of a record set.
fn alpha_index<F: Real>(records: &[BacktestRecord<F>], alpha: F) -> Result<usize> {
    let first = records.first().ok_or(Error::InvalidParameter {
        what: "backtest records",
        why: "metrics need at least one record".into(),
    })?;
    first
        .intervals
        .iter()
        .position(|pi| pi.alpha == alpha)
        .ok_or(Error::InvalidParameter {
            what: "confidence level",
            why: format!(
                "alpha {} was not part of the backtest",
                alpha.to_f64().unwrap_or(f64::NAN)
            ),
        })
}

/// Mean interval width normalized by `nominal_power`.
///
/// # Errors
///
/// Fails on empty records, an `alpha` the backtest did not include, or a
/// non-positive `nominal_power`.
pub fn pinaw<F: Real>(records: &[BacktestRecord<F>], alpha: F, nominal_power: F) -> Result<F> {
    if !(nominal_power.is_finite() && nominal_power > F::zero()) {
        return Err(Error::InvalidParameter {
            what: "nominal power",
            why: format!(
                "must be finite and positive, got {}",
                nominal_power.to_f64().unwrap_or(f64::NAN)
            ),
        });
    }
    let idx = alpha_index(records, alpha)?;
    let mut sum = F::zero();
    for r in records {
        sum = sum + r.intervals[idx].width();
    }
    Ok(sum / (nominal_power * F::from_config(records.len() as f64)))
}

/// Fraction of readings covered by their interval, bounds inclusive.
///
/// # Errors
///
/// Fails on empty records or an `alpha` the backtest did not include.
pub fn picp<F: Real>(records: &[BacktestRecord<F>], alpha: F) -> Result<F> {
    let idx = alpha_index(records, alpha)?;
    let hits = records
        .iter()
        .filter(|r| r.intervals[idx].covers(r.power))
        .count();
    Ok(F::from_config(hits as f64) / F::from_config(records.len() as f64))
}

/// Default steepness of the CWC coverage penalty: `ln(10) / 10`, i.e. one
/// order of magnitude of penalty per 10 percentage points of coverage
/// shortfall (scaled by `1 - alpha`).
pub fn default_mu() -> f64 {
    10f64.ln() / 10.0
}

/// Coverage–width criterion: `pinaw * max(1, exp(-mu (picp - alpha) / (1 -
/// alpha)))`.
///
/// Equal to `pinaw` whenever coverage meets the target; grows
/// exponentially as coverage falls short, and more steeply for stricter
/// targets. Lower is better.
pub fn cwc<F: Real>(pinaw: F, picp: F, alpha: F, mu: F) -> F {
    let shortfall = (picp - alpha) / (F::one() - alpha);
    let penalty = (-mu * shortfall).exp().max(F::one());
    pinaw * penalty
}

/// Error rates over consecutive wall-clock windows.
///
/// Windows of `window_s` seconds start at the first record's timestamp;
/// each rate is `1 - coverage` within that window. The trailing window is
/// kept even if the records only partially fill it; windows containing no
/// records produce no entry. Useful for judging how
/// evenly miscoverage spreads over a long run: a model can hit its average
/// coverage while failing badly during regime shifts, and this view makes
/// that visible.
///
/// # Errors
///
/// Fails on empty records, an unknown `alpha`, or a non-positive window.
pub fn windowed_error_rates<F: Real>(
    records: &[BacktestRecord<F>],
    alpha: F,
    window_s: f64,
) -> Result<Vec<F>> {
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::InvalidParameter {
            what: "window length",
            why: format!("must be finite and positive, got {window_s} s"),
        });
    }
    let idx = alpha_index(records, alpha)?;
    let window_ms = (window_s * 1000.0).round().max(1.0) as i64;
    let t0 = records[0].timestamp_ms;

    let mut rates = Vec::new();
    let mut current_window = 0i64;
    let mut misses = 0usize;
    let mut count = 0usize;
    for r in records {
        let w = (r.timestamp_ms - t0) / window_ms;
        if w != current_window {
            rates.push(F::from_config(misses as f64 / count as f64));
            current_window = w;
            misses = 0;
            count = 0;
        }
        count += 1;
        if !r.intervals[idx].covers(r.power) {
            misses += 1;
        }
    }
    rates.push(F::from_config(misses as f64 / count as f64));
    Ok(rates)
}

/// Quality summary for one confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMetrics<F: Real> {
    pub alpha: F,
    pub pinaw: F,
    pub picp: F,
    pub cwc: F,
    pub windowed_error_rates: Vec<F>,
}

/// Full backtest summary: one [`AlphaMetrics`] per confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport<F: Real> {
    /// Normalization constant the widths were divided by.
    pub nominal_power: F,
    /// Number of backtest steps graded.
    pub n_records: usize,
    /// Window length used for the windowed error rates, in seconds.
    pub window_s: f64,
    pub per_alpha: Vec<AlphaMetrics<F>>,
}

/// Grades backtest records at every confidence level they carry.
///
/// `window_s` controls the windowed error-rate view (21600 s = 6 h is the
/// conventional choice); `mu` is the CWC penalty steepness, usually
/// [`default_mu`].
///
/// # Errors
///
/// Fails on empty records or a non-positive `nominal_power` / `window_s`.
pub fn evaluate<F: Real>(
    records: &[BacktestRecord<F>],
    nominal_power: F,
    window_s: f64,
    mu: F,
) -> Result<EvaluationReport<F>> {
    let first = records.first().ok_or(Error::InvalidParameter {
        what: "backtest records",
        why: "evaluation needs at least one record".into(),
    })?;
    let alphas: Vec<F> = first.intervals.iter().map(|pi| pi.alpha).collect();
    let mut per_alpha = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        let pinaw = pinaw(records, alpha, nominal_power)?;
        let picp = picp(records, alpha)?;
        per_alpha.push(AlphaMetrics {
            alpha,
            pinaw,
            picp,
            cwc: cwc(pinaw, picp, alpha, mu),
            windowed_error_rates: windowed_error_rates(records, alpha, window_s)?,
        });
    }
    Ok(EvaluationReport {
        nominal_power,
        n_records: records.len(),
        window_s,
        per_alpha,
    })
}

/// Reduces a series to a coarser sampling period by non-overlapping block
/// means.
///
/// The target period must be a positive multiple of the source period.
/// Each output value is the mean of one block of consecutive source
/// samples and carries the timestamp of the block's *last* constituent
/// sample, so an estimator replaying the result still only sees data from
/// the past. A trailing incomplete block is dropped.
///
/// # Errors
///
/// Fails when the periods do not divide or when no complete block fits.
pub fn downsample<F: Real>(series: &TimeSeries<F>, target_period_ms: i64) -> Result<TimeSeries<F>> {
    let source_ms = series.period_ms();
    if target_period_ms <= 0 || target_period_ms % source_ms != 0 {
        return Err(Error::IncompatiblePeriods {
            source_ms,
            target_ms: target_period_ms,
        });
    }
    let k = (target_period_ms / source_ms) as usize;
    if k == 1 {
        return Ok(series.clone());
    }
    let n_blocks = series.len() / k;
    if n_blocks == 0 {
        return Err(Error::TooFewSamples {
            needed: k,
            got: series.len(),
        });
    }
    // True division keeps exactly-representable means exact (a reciprocal
    // multiply would not), which matters when resampling in stages.
    let k_f = F::from_config(k as f64);
    let mut values = Vec::with_capacity(n_blocks);
    for block in series.values().chunks_exact(k) {
        let mut sum = F::zero();
        for &v in block {
            sum = sum + v;
        }
        values.push(sum / k_f);
    }
    let start_ms = series.start_ms() + (k as i64 - 1) * source_ms;
    TimeSeries::new(start_ms, target_period_ms, values)
}

/// Grid of configurations for [`sweep`]: the Cartesian product of all four
/// axes is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub variants: Vec<Variant>,
    pub cluster_counts: Vec<usize>,
    pub forgetting_times_s: Vec<f64>,
    /// Sampling periods to evaluate at; the train and test series are
    /// downsampled to each. Periods equal to the source period pass the
    /// data through unchanged.
    pub periods_ms: Vec<i64>,
}

impl SweepGrid {
    fn validate(&self) -> Result<()> {
        for (what, empty) in [
            ("variant axis", self.variants.is_empty()),
            ("cluster-count axis", self.cluster_counts.is_empty()),
            ("forgetting-time axis", self.forgetting_times_s.is_empty()),
            ("period axis", self.periods_ms.is_empty()),
        ] {
            if empty {
                return Err(Error::InvalidParameter {
                    what,
                    why: "must not be empty".into(),
                });
            }
        }
        Ok(())
    }

    /// All grid points in deterministic (row-major) order.
    fn keys(&self) -> Vec<SweepKey> {
        let mut keys = Vec::new();
        for &variant in &self.variants {
            for &clusters in &self.cluster_counts {
                for &forgetting_time_s in &self.forgetting_times_s {
                    for &period_ms in &self.periods_ms {
                        keys.push(SweepKey {
                            variant,
                            clusters,
                            forgetting_time_s,
                            period_ms,
                        });
                    }
                }
            }
        }
        keys
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepKey {
    pub variant: Variant,
    pub clusters: usize,
    pub forgetting_time_s: f64,
    pub period_ms: i64,
}

impl core::fmt::Display for SweepKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "variant={} clusters={} forgetting={}s period={}ms",
            self.variant, self.clusters, self.forgetting_time_s, self.period_ms
        )
    }
}

/// Result of one sweep row: the grid point and either its report or the
/// error that stopped it. Row failures (for instance a cluster count larger
/// than the downsampled training set) do not abort the other rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome<F: Real> {
    pub key: SweepKey,
    pub report: Result<EvaluationReport<F>, String>,
}

/// Shared sweep settings beyond the grid axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams<F: Real> {
    /// Template configuration; each row overrides variant, cluster count
    /// and forgetting time from its grid point.
    pub base: EstimatorConfig,
    /// Confidence levels every row is graded at.
    pub alphas: Vec<F>,
    /// Width normalization; `None` uses each row's own training-derived
    /// nominal power (which then varies with the period's block means).
    pub nominal_power: Option<F>,
    /// Window for windowed error rates, in seconds.
    pub window_s: f64,
    /// CWC penalty steepness.
    pub mu: F,
    /// Worker threads; 0 picks the rayon default.
    pub parallelism: usize,
}

/// Trains and backtests every grid point, in parallel.
///
/// Rows are independent: each downsamples the train/test pair to its
/// period, trains a fresh estimator, backtests, and grades. The returned
/// vector is in grid order regardless of `parallelism`, and identical
/// runs produce identical results whatever the thread count, because no
/// row reads another row's state.
///
/// # Errors
///
/// Fails up front on an empty grid axis, alphas, or a period that does not
/// divide — per-row training/backtest failures are reported inside their
/// [`SweepOutcome`] instead.
pub fn sweep<F: Real>(
    grid: &SweepGrid,
    params: &SweepParams<F>,
    train: &TimeSeries<F>,
    test: &TimeSeries<F>,
) -> Result<Vec<SweepOutcome<F>>> {
    grid.validate()?;
    if params.alphas.is_empty() {
        return Err(Error::InvalidParameter {
            what: "confidence levels",
            why: "at least one alpha is required".into(),
        });
    }
    // Resolve every distinct period once, serially; an indivisible period
    // is a configuration mistake and fails the whole sweep.
    let mut resampled: Vec<(i64, TimeSeries<F>, TimeSeries<F>)> = Vec::new();
    for &period_ms in &grid.periods_ms {
        if resampled.iter().any(|(p, _, _)| *p == period_ms) {
            continue;
        }
        let train_d = downsample(train, period_ms)?;
        let test_d = downsample(test, period_ms)?;
        resampled.push((period_ms, train_d, test_d));
    }

    let keys = grid.keys();
    let run_row = |key: &SweepKey| -> Result<EvaluationReport<F>, String> {
        let (_, train_d, test_d) = resampled
            .iter()
            .find(|(p, _, _)| *p == key.period_ms)
            .expect("period resolved above");
        let config = EstimatorConfig {
            variant: key.variant,
            clusters: key.clusters,
            forgetting_time_s: key.forgetting_time_s,
            ..params.base.clone()
        };
        let run = || -> Result<EvaluationReport<F>> {
            let mut estimator = Estimator::batch_train(&config, train_d)?;
            let nominal = params.nominal_power.unwrap_or_else(|| estimator.nominal_power());
            let records = backtest(&mut estimator, test_d, &params.alphas)?;
            evaluate(&records, nominal, params.window_s, params.mu)
        };
        run().map_err(|e| e.to_string())
    };

    let outcomes: Vec<SweepOutcome<F>> = if params.parallelism == 1 {
        keys.iter()
            .map(|key| SweepOutcome {
                key: *key,
                report: run_row(key),
            })
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(params.parallelism)
            .build()
            .map_err(|e| Error::InvalidParameter {
                what: "parallelism",
                why: e.to_string(),
            })?;
        pool.install(|| {
            keys.par_iter()
                .map(|key| SweepOutcome {
                    key: *key,
                    report: run_row(key),
                })
                .collect()
        })
    };
    Ok(outcomes)
}

/// Successful sweep rows ranked by CWC at `alpha`, best first.
///
/// Rows that failed or did not grade `alpha` are omitted. Ties keep grid
/// order, so the ranking is deterministic.
pub fn rank_by_cwc<'a, F: Real>(
    outcomes: &'a [SweepOutcome<F>],
    alpha: F,
) -> Vec<(&'a SweepKey, &'a AlphaMetrics<F>)> {
    let mut ranked: Vec<(&SweepKey, &AlphaMetrics<F>)> = outcomes
        .iter()
        .filter_map(|o| {
            let report = o.report.as_ref().ok()?;
            let metrics = report.per_alpha.iter().find(|m| m.alpha == alpha)?;
            Some((&o.key, metrics))
        })
        .collect();
    ranked.sort_by(|a, b| {
        a.1.cwc
            .partial_cmp(&b.1.cwc)
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ts: i64, power: f64, lower: f64, upper: f64) -> BacktestRecord<f64> {
        BacktestRecord {
            timestamp_ms: ts,
            power,
            intervals: vec![Pi {
                alpha: 0.9,
                lower,
                upper,
            }],
        }
    }

    #[test]
    fn picp_counts_closed_bounds() {
        let records = vec![
            record(0, 1.0, 1.0, 2.0),  // on the lower bound: covered
            record(10, 2.0, 1.0, 2.0), // on the upper bound: covered
            record(20, 3.0, 1.0, 2.0), // outside
            record(30, 1.5, 1.0, 2.0), // inside
        ];
        assert_eq!(picp(&records, 0.9).unwrap(), 0.75);
    }

    #[test]
    fn pinaw_normalizes_mean_width() {
        let records = vec![record(0, 0.0, -1.0, 1.0), record(10, 0.0, -2.0, 2.0)];
        // Mean width 3, nominal 10.
        assert_eq!(pinaw(&records, 0.9, 10.0).unwrap(), 0.3);
        assert!(pinaw(&records, 0.9, 0.0).is_err());
        assert!(pinaw(&records, 0.5, 10.0).is_err(), "unknown alpha");
    }

    #[test]
    fn cwc_equals_pinaw_at_or_above_target_coverage() {
        let mu = default_mu();
        assert_eq!(cwc(0.25, 0.9, 0.9, mu), 0.25);
        assert_eq!(cwc(0.25, 0.95, 0.9, mu), 0.25);
        // Below target the penalty exceeds 1.
        assert!(cwc(0.25, 0.85, 0.9, mu) > 0.25);
    }

    #[test]
    fn cwc_penalty_matches_the_closed_form() {
        // 10 points of shortfall at alpha = 0.99 is a shortfall ratio of
        // -10, and mu = ln(10)/10 turns that into a 10x penalty exactly.
        let got = cwc(0.05, 0.89, 0.99, default_mu());
        assert!((got - 0.5).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn windowed_rates_split_on_wall_clock_windows() {
        // 6 records at 1 s spacing, 2 s windows: windows of 2, 2, 2.
        let mut records = Vec::new();
        for i in 0..6 {
            let covered = i != 2 && i != 3; // both misses in window 1
            let (lo, hi) = if covered { (0.0, 2.0) } else { (5.0, 6.0) };
            records.push(record(i * 1_000, 1.0, lo, hi));
        }
        let rates = windowed_error_rates(&records, 0.9, 2.0).unwrap();
        assert_eq!(rates, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn trailing_partial_window_is_kept() {
        let records: Vec<_> = (0..5).map(|i| record(i * 1_000, 1.0, 0.0, 2.0)).collect();
        let rates = windowed_error_rates(&records, 0.9, 2.0).unwrap();
        // Windows hold 2, 2, and 1 records.
        assert_eq!(rates.len(), 3);
        assert!(rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn record_weighted_window_rates_recover_total_coverage() {
        // Weighted by record count, the window rates must average to the
        // overall miss rate even with a partial trailing window.
        let mut records = Vec::new();
        for i in 0..7 {
            let covered = i % 3 != 1;
            let (lo, hi) = if covered { (0.0, 2.0) } else { (5.0, 6.0) };
            records.push(record(i * 1_000, 1.0, lo, hi));
        }
        let rates = windowed_error_rates(&records, 0.9, 3.0).unwrap();
        let counts = [3.0, 3.0, 1.0];
        let weighted: f64 = rates.iter().zip(counts).map(|(r, c)| r * c).sum::<f64>() / 7.0;
        let total_miss = 1.0 - picp(&records, 0.9).unwrap();
        assert!((weighted - total_miss).abs() < 1e-15);
    }

    #[test]
    fn downsample_means_blocks_and_keeps_causal_timestamps() {
        let s = TimeSeries::new(100, 20, vec![0.0, 2.0, 4.0, 6.0, 8.0]).unwrap();
        let d = downsample(&s, 100).unwrap();
        // One complete block of five samples, mean 4, stamped at the last
        // constituent sample's time.
        assert_eq!(d.values(), &[4.0]);
        assert_eq!(d.start_ms(), 100 + 4 * 20);
        assert_eq!(d.period_ms(), 100);
    }

    #[test]
    fn downsample_drops_trailing_partial_block() {
        let s = TimeSeries::new(0, 10, vec![1.0, 3.0, 5.0, 7.0, 9.0]).unwrap();
        let d = downsample(&s, 20).unwrap();
        assert_eq!(d.values(), &[2.0, 6.0]);
    }

    #[test]
    fn downsample_rejects_indivisible_periods() {
        let s = TimeSeries::new(0, 20, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            downsample(&s, 50),
            Err(Error::IncompatiblePeriods {
                source_ms: 20,
                target_ms: 50
            })
        ));
        assert!(downsample(&s, 0).is_err());
        // Identity period passes through.
        assert_eq!(downsample(&s, 20).unwrap(), s);
    }

    #[test]
    fn backtest_checks_the_period() {
        let train = TimeSeries::new(0, 20, (0..100).map(|i| (i % 7) as f64).collect()).unwrap();
        let cfg = EstimatorConfig {
            forgetting_time_s: 1.0,
            ..EstimatorConfig::default()
        };
        let mut est = Estimator::batch_train(&cfg, &train).unwrap();
        let test_bad = TimeSeries::new(2_000, 40, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            backtest(&mut est, &test_bad, &[0.9]),
            Err(Error::PeriodMismatch {
                expected_ms: 20,
                found_ms: 40
            })
        ));
        let test_ok = TimeSeries::new(2_000, 20, vec![1.0, 2.0, 3.0]).unwrap();
        let records = backtest(&mut est, &test_ok, &[0.9, 0.99]).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].intervals.len(), 2);
        assert!(backtest(&mut est, &test_ok, &[]).is_err());
    }

    #[test]
    fn evaluate_covers_every_alpha() {
        let train = TimeSeries::new(0, 20, (0..200).map(|i| (i % 5) as f64).collect()).unwrap();
        let test = TimeSeries::new(4_000, 20, (0..100).map(|i| ((i + 3) % 5) as f64).collect())
            .unwrap();
        let cfg = EstimatorConfig {
            forgetting_time_s: 1.0,
            domain_bins: 101,
            ..EstimatorConfig::default()
        };
        let mut est = Estimator::batch_train(&cfg, &train).unwrap();
        let records = backtest(&mut est, &test, &[0.9, 0.99]).unwrap();
        let report = evaluate(&records, est.nominal_power(), 0.5, default_mu()).unwrap();
        assert_eq!(report.n_records, 100);
        assert_eq!(report.per_alpha.len(), 2);
        for m in &report.per_alpha {
            assert!(m.pinaw >= 0.0);
            assert!((0.0..=1.0).contains(&m.picp));
            assert!(m.cwc >= m.pinaw);
            assert!(!m.windowed_error_rates.is_empty());
        }
        // Wider target alpha can only widen intervals.
        assert!(report.per_alpha[1].pinaw >= report.per_alpha[0].pinaw);
    }

    #[test]
    fn sweep_reports_every_grid_point_in_order() {
        let values: Vec<f64> = (0..400)
            .map(|i| if (i / 50) % 2 == 0 { 10.0 } else { 20.0 })
            .collect();
        let train = TimeSeries::new(0, 20, values.clone()).unwrap();
        let test = TimeSeries::new(400 * 20, 20, values).unwrap();
        let grid = SweepGrid {
            variants: vec![Variant::Absolute, Variant::Differential],
            cluster_counts: vec![1, 2],
            forgetting_times_s: vec![1.0],
            periods_ms: vec![20, 100],
        };
        let params = SweepParams {
            base: EstimatorConfig {
                domain_bins: 101,
                ..EstimatorConfig::default()
            },
            alphas: vec![0.9],
            nominal_power: None,
            window_s: 2.0,
            mu: default_mu(),
            parallelism: 2,
        };
        let outcomes = sweep(&grid, &params, &train, &test).unwrap();
        assert_eq!(outcomes.len(), 8);
        // Grid order: variant-major, then clusters, forgetting, period.
        assert_eq!(outcomes[0].key.variant, Variant::Absolute);
        assert_eq!(outcomes[0].key.period_ms, 20);
        assert_eq!(outcomes[1].key.period_ms, 100);
        assert_eq!(outcomes[7].key.variant, Variant::Differential);
        assert!(outcomes.iter().all(|o| o.report.is_ok()));

        let ranked = rank_by_cwc(&outcomes, 0.9);
        assert_eq!(ranked.len(), 8);
        assert!(ranked.windows(2).all(|w| w[0].1.cwc <= w[1].1.cwc));
    }

    #[test]
    fn sweep_row_failures_do_not_abort_the_rest() {
        let values: Vec<f64> = (0..100).map(|i| (i % 9) as f64).collect();
        let train = TimeSeries::new(0, 20, values.clone()).unwrap();
        let test = TimeSeries::new(100 * 20, 20, values).unwrap();
        let grid = SweepGrid {
            variants: vec![Variant::Absolute],
            // 500 clusters cannot be trained from 100 samples.
            cluster_counts: vec![1, 500],
            forgetting_times_s: vec![1.0],
            periods_ms: vec![20],
        };
        let params = SweepParams {
            base: EstimatorConfig {
                domain_bins: 101,
                ..EstimatorConfig::default()
            },
            alphas: vec![0.9],
            nominal_power: None,
            window_s: 2.0,
            mu: default_mu(),
            parallelism: 1,
        };
        let outcomes = sweep(&grid, &params, &train, &test).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert!(outcomes[0].report.is_ok());
        let err = outcomes[1].report.as_ref().unwrap_err();
        assert!(err.contains("500"), "unexpected error text: {err}");
        // An indivisible sweep period is a grid mistake: whole sweep fails.
        let bad_grid = SweepGrid {
            periods_ms: vec![30],
            ..grid.clone()
        };
        assert!(sweep(&bad_grid, &params, &train, &test).is_err());
    }

    #[test]
    fn sweep_is_deterministic_across_parallelism() {
        let values: Vec<f64> = (0..600)
            .map(|i| 100.0 + ((i * 37) % 50) as f64)
            .collect();
        let train = TimeSeries::new(0, 20, values.clone()).unwrap();
        let test = TimeSeries::new(600 * 20, 20, values).unwrap();
        let grid = SweepGrid {
            variants: vec![Variant::Absolute, Variant::Differential],
            cluster_counts: vec![1, 3],
            forgetting_times_s: vec![0.5, 5.0],
            periods_ms: vec![20, 60],
        };
        let mk_params = |parallelism| SweepParams {
            base: EstimatorConfig {
                domain_bins: 201,
                ..EstimatorConfig::default()
            },
            alphas: vec![0.9, 0.99],
            nominal_power: None,
            window_s: 1.0,
            mu: default_mu(),
            parallelism,
        };
        let serial = sweep(&grid, &mk_params(1), &train, &test).unwrap();
        let parallel = sweep(&grid, &mk_params(4), &train, &test).unwrap();
        assert_eq!(serial, parallel);
    }
}
