//! Synthetic prosumption profiles for benchmarks and tests.
//!
//! Real prosumption telemetry is rarely shareable, so the toolkit ships a
//! small generator covering the regimes the estimator is built for. Every
//! profile is the sum of four components, any of which can be switched off:
//!
//! * a constant **base** load;
//! * a **diurnal** sinusoid keyed to the time of day;
//! * a **level process** that dwells on one of a fixed set of power levels
//!   for exponentially distributed times, moving between levels through a
//!   first-order lag (instantaneous if the lag is zero);
//! * transient **events** arriving as a Poisson process, each adding a
//!   random-sign excursion that decays exponentially;
//!
//! plus iid Gaussian measurement noise on top. Generation is fully
//! deterministic for a given profile (including its seed), so any series
//! used in a test can be reproduced exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::cluster::time_of_day_s;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::TimeSeries;

/// Parameters of one synthetic prosumption stream.
///
/// Use the named constructors for tuned presets, then adjust fields
/// directly for variations:
///
/// ```
/// use ustpi::SyntheticProfile;
///
/// let quiet_office = SyntheticProfile {
///     noise_sd_w: 0.0,
///     event_rate_per_hour: 0.0,
///     ..SyntheticProfile::office()
/// };
/// # let _ = quiet_office;
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProfile {
    /// Preset name, kept for labeling output.
    pub name: &'static str,
    /// Constant load component in watts.
    pub base_power_w: f64,
    /// Amplitude of the 24-hour sinusoidal component in watts.
    pub diurnal_amplitude_w: f64,
    /// Standard deviation of per-sample Gaussian noise in watts.
    pub noise_sd_w: f64,
    /// Power levels the switching component dwells on; empty or
    /// single-element disables switching.
    pub levels_w: Vec<f64>,
    /// Mean dwell time on a level before switching, in seconds.
    pub mean_dwell_s: f64,
    /// Per-dwell Gaussian offset applied to the chosen level, in watts —
    /// real plateaus differ session to session (vehicle current limits,
    /// compressor operating points), and zero disables the jitter.
    pub level_jitter_sd_w: f64,
    /// First-order time constant for moves between levels, in seconds;
    /// zero switches instantaneously.
    pub transition_time_s: f64,
    /// Poisson arrival rate of transient excursions, per hour.
    pub event_rate_per_hour: f64,
    /// Typical excursion size in watts; each event draws a random sign and
    /// ±50% size jitter.
    pub event_magnitude_w: f64,
    /// Exponential decay time constant of excursions, in seconds.
    pub event_decay_s: f64,
    /// RNG seed; same profile + same seed = identical series.
    pub seed: u64,
}

impl SyntheticProfile {
    /// Office building: 50 kW base with a 20 kW daily swing, moderate
    /// noise, and occasional kW-scale transients (cloud cover on rooftop
    /// PV, HVAC bursts).
    pub fn office() -> Self {
        Self {
            name: "office",
            base_power_w: 50_000.0,
            diurnal_amplitude_w: 20_000.0,
            noise_sd_w: 1_500.0,
            levels_w: Vec::new(),
            mean_dwell_s: 0.0,
            level_jitter_sd_w: 0.0,
            transition_time_s: 0.0,
            event_rate_per_hour: 2.0,
            event_magnitude_w: 15_000.0,
            event_decay_s: 300.0,
            seed: 1,
        }
    }

    /// EV charging station: power sits on one of four plateaus (0–3
    /// vehicles at 50 kW each) with ~10-minute dwells and brisk ramps.
    pub fn ev_charging() -> Self {
        Self {
            name: "ev-charging",
            base_power_w: 0.0,
            diurnal_amplitude_w: 0.0,
            noise_sd_w: 200.0,
            levels_w: vec![0.0, 50_000.0, 100_000.0, 150_000.0],
            mean_dwell_s: 600.0,
            level_jitter_sd_w: 2_000.0,
            transition_time_s: 5.0,
            event_rate_per_hour: 0.0,
            event_magnitude_w: 0.0,
            event_decay_s: 1.0,
            seed: 2,
        }
    }

    /// Industrial heat pump: 30 kW standby and a 1.5 MW duty level with
    /// ~15-minute cycles and slow thermal ramps — the "rare huge jump"
    /// stress case.
    pub fn heat_pump() -> Self {
        Self {
            name: "heat-pump",
            base_power_w: 0.0,
            diurnal_amplitude_w: 0.0,
            noise_sd_w: 5_000.0,
            levels_w: vec![30_000.0, 1_500_000.0],
            mean_dwell_s: 900.0,
            level_jitter_sd_w: 10_000.0,
            transition_time_s: 45.0,
            event_rate_per_hour: 0.0,
            event_magnitude_w: 0.0,
            event_decay_s: 1.0,
            seed: 3,
        }
    }

    /// Preset by name, as accepted on the command line.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "office" => Ok(Self::office()),
            "ev-charging" => Ok(Self::ev_charging()),
            "heat-pump" => Ok(Self::heat_pump()),
            other => Err(Error::InvalidParameter {
                what: "profile name",
                why: format!(
                    "unknown profile {other:?}; expected office, ev-charging or heat-pump"
                ),
            }),
        }
    }

    /// Same profile with a different seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let finite_nonneg: [(&'static str, f64); 6] = [
            ("noise standard deviation", self.noise_sd_w),
            ("level jitter", self.level_jitter_sd_w),
            ("transition time", self.transition_time_s),
            ("event rate", self.event_rate_per_hour),
            ("event magnitude", self.event_magnitude_w),
            ("event decay time", self.event_decay_s),
        ];
        for (what, v) in finite_nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    what,
                    why: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        for (what, v) in [
            ("base power", self.base_power_w),
            ("diurnal amplitude", self.diurnal_amplitude_w),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    what,
                    why: format!("must be finite, got {v}"),
                });
            }
        }
        if self.levels_w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "power levels",
                why: "must all be finite".into(),
            });
        }
        if self.levels_w.len() >= 2 && !(self.mean_dwell_s.is_finite() && self.mean_dwell_s > 0.0)
        {
            return Err(Error::InvalidParameter {
                what: "mean dwell time",
                why: format!(
                    "must be positive when several levels are given, got {}",
                    self.mean_dwell_s
                ),
            });
        }
        Ok(())
    }
}

/// Generates `n_samples` readings of `profile` starting at `start_ms`,
/// spaced `period_ms` apart.
///
/// # Errors
///
/// Fails on non-positive period, zero samples, or profile parameters that
/// are out of range.
pub fn generate<F: Real>(
    profile: &SyntheticProfile,
    start_ms: i64,
    period_ms: i64,
    n_samples: usize,
) -> Result<TimeSeries<F>> {
    profile.validate()?;
    if period_ms <= 0 {
        return Err(Error::InvalidParameter {
            what: "sampling period",
            why: format!("must be positive, got {period_ms} ms"),
        });
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter {
            what: "sample count",
            why: "must be at least 1".into(),
        });
    }

    let period_s = period_ms as f64 / 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);

    let noise = if profile.noise_sd_w > 0.0 {
        Some(Normal::new(0.0, profile.noise_sd_w).expect("validated sd"))
    } else {
        None
    };
    let dwell = if profile.levels_w.len() >= 2 {
        Some(Exp::new(1.0 / profile.mean_dwell_s).expect("validated dwell"))
    } else {
        None
    };
    let jitter = if !profile.levels_w.is_empty() && profile.level_jitter_sd_w > 0.0 {
        Some(Normal::new(0.0, profile.level_jitter_sd_w).expect("validated jitter"))
    } else {
        None
    };
    // Per-step survival factors for first-order transitions and event decay.
    let level_pull = if profile.transition_time_s > 0.0 {
        1.0 - (-period_s / profile.transition_time_s).exp()
    } else {
        1.0
    };
    let event_keep = if profile.event_decay_s > 0.0 {
        (-period_s / profile.event_decay_s).exp()
    } else {
        0.0
    };
    let event_p = (profile.event_rate_per_hour / 3600.0 * period_s).min(1.0);

    // Level-process state: where the lag currently is, which plateau it is
    // heading to, and how long it stays there once switching is due.
    let mut target_idx = if profile.levels_w.is_empty() {
        0
    } else {
        rng.random_range(0..profile.levels_w.len())
    };
    let mut target_offset = jitter.as_ref().map_or(0.0, |j| j.sample(&mut rng));
    let mut level_actual = profile.levels_w.get(target_idx).copied().unwrap_or(0.0) + target_offset;
    let mut dwell_left_s = dwell.map_or(f64::INFINITY, |d| d.sample(&mut rng));
    let mut event_offset = 0.0f64;

    let mut values = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let ts = start_ms + i as i64 * period_ms;

        if let Some(d) = dwell {
            dwell_left_s -= period_s;
            while dwell_left_s <= 0.0 {
                // Move to a different plateau, chosen uniformly.
                let mut next = rng.random_range(0..profile.levels_w.len() - 1);
                if next >= target_idx {
                    next += 1;
                }
                target_idx = next;
                target_offset = jitter.as_ref().map_or(0.0, |j| j.sample(&mut rng));
                dwell_left_s += d.sample(&mut rng);
            }
        }
        let target = profile.levels_w.get(target_idx).copied().unwrap_or(0.0) + target_offset;
        level_actual += (target - level_actual) * level_pull;

        event_offset *= event_keep;
        if event_p > 0.0 && rng.random::<f64>() < event_p {
            let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            let jitter = 0.5 + rng.random::<f64>();
            event_offset += sign * jitter * profile.event_magnitude_w;
        }

        let diurnal = if profile.diurnal_amplitude_w != 0.0 {
            let tod: f64 = time_of_day_s(ts);
            profile.diurnal_amplitude_w
                * (2.0 * std::f64::consts::PI * tod / 86_400.0).sin()
        } else {
            0.0
        };
        let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));

        let v = profile.base_power_w + diurnal + level_actual + event_offset + n;
        values.push(F::from_config(v));
    }

    TimeSeries::new(start_ms, period_ms, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let p = SyntheticProfile::ev_charging();
        let a: TimeSeries<f64> = generate(&p, 0, 100, 5_000).unwrap();
        let b: TimeSeries<f64> = generate(&p, 0, 100, 5_000).unwrap();
        assert_eq!(a.values(), b.values());

        let c: TimeSeries<f64> = generate(&p.clone().with_seed(99), 0, 100, 5_000).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn noiseless_office_is_exactly_daily_periodic() {
        let p = SyntheticProfile {
            noise_sd_w: 0.0,
            event_rate_per_hour: 0.0,
            ..SyntheticProfile::office()
        };
        // One sample per minute over two days.
        let s: TimeSeries<f64> = generate(&p, 0, 60_000, 2 * 1_440).unwrap();
        for i in 0..1_440 {
            assert_eq!(s.values()[i], s.values()[i + 1_440], "minute {i}");
        }
        // And the waveform is the documented sinusoid.
        let six_am = 6 * 60;
        assert!((s.values()[six_am] - 70_000.0).abs() < 1e-9);
    }

    #[test]
    fn clean_level_process_stays_exactly_on_the_plateaus() {
        let p = SyntheticProfile {
            noise_sd_w: 0.0,
            transition_time_s: 0.0,
            level_jitter_sd_w: 0.0,
            ..SyntheticProfile::ev_charging()
        };
        let s: TimeSeries<f64> = generate(&p, 0, 1_000, 10_000).unwrap();
        let levels = &SyntheticProfile::ev_charging().levels_w;
        let mut seen = std::collections::BTreeSet::new();
        for &v in s.values() {
            assert!(levels.contains(&v), "{v} is not a plateau");
            seen.insert(v as i64);
        }
        assert!(seen.len() >= 2, "the level process never switched");
    }

    #[test]
    fn transitions_are_smoothed_by_the_lag() {
        let p = SyntheticProfile {
            noise_sd_w: 0.0,
            ..SyntheticProfile::heat_pump()
        };
        let s: TimeSeries<f64> = generate(&p, 0, 1_000, 7_200).unwrap();
        let full_swing = 1_500_000.0 - 30_000.0;
        let largest_step = s
            .values()
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0f64, f64::max);
        assert!(largest_step > 0.0);
        // With a 45 s lag sampled at 1 s, one step covers at most
        // 1 - exp(-1/45) ≈ 2.2% of the remaining swing.
        assert!(
            largest_step < 0.05 * full_swing,
            "step {largest_step} too sharp for the configured lag"
        );
    }

    #[test]
    fn events_perturb_and_then_decay() {
        let p = SyntheticProfile {
            noise_sd_w: 0.0,
            diurnal_amplitude_w: 0.0,
            event_rate_per_hour: 3600.0, // one per second on average
            ..SyntheticProfile::office()
        };
        let s: TimeSeries<f64> = generate(&p, 0, 1_000, 600).unwrap();
        let base = p.base_power_w;
        assert!(
            s.values().iter().any(|&v| (v - base).abs() > 1_000.0),
            "events never fired"
        );

        let calm = SyntheticProfile {
            event_rate_per_hour: 0.0,
            ..p.clone()
        };
        let c: TimeSeries<f64> = generate(&calm, 0, 1_000, 600).unwrap();
        assert!(c.values().iter().all(|&v| v == base));
    }

    #[test]
    fn series_shape_matches_the_request() {
        let p = SyntheticProfile::office();
        let s: TimeSeries<f64> = generate(&p, 1_000_000, 250, 123).unwrap();
        assert_eq!(s.len(), 123);
        assert_eq!(s.start_ms(), 1_000_000);
        assert_eq!(s.period_ms(), 250);
        assert_eq!(s.timestamp_ms(122), 1_000_000 + 122 * 250);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let p = SyntheticProfile::office();
        assert!(generate::<f64>(&p, 0, 0, 10).is_err());
        assert!(generate::<f64>(&p, 0, 20, 0).is_err());

        let bad_noise = SyntheticProfile {
            noise_sd_w: -1.0,
            ..SyntheticProfile::office()
        };
        assert!(generate::<f64>(&bad_noise, 0, 20, 10).is_err());

        let bad_dwell = SyntheticProfile {
            mean_dwell_s: 0.0,
            ..SyntheticProfile::ev_charging()
        };
        assert!(generate::<f64>(&bad_dwell, 0, 20, 10).is_err());

        let bad_level = SyntheticProfile {
            levels_w: vec![0.0, f64::NAN],
            ..SyntheticProfile::ev_charging()
        };
        assert!(generate::<f64>(&bad_level, 0, 20, 10).is_err());

        let bad_jitter = SyntheticProfile {
            level_jitter_sd_w: -5.0,
            ..SyntheticProfile::ev_charging()
        };
        assert!(generate::<f64>(&bad_jitter, 0, 20, 10).is_err());

        assert!(SyntheticProfile::by_name("solar-farm").is_err());
        assert_eq!(SyntheticProfile::by_name("heat-pump").unwrap().name, "heat-pump");
    }

    #[test]
    fn f32_generation_works() {
        let p = SyntheticProfile::ev_charging();
        let s: TimeSeries<f32> = generate(&p, 0, 100, 1_000).unwrap();
        assert_eq!(s.len(), 1_000);
        assert!(s.values().iter().all(|v| v.is_finite()));
    }
}
