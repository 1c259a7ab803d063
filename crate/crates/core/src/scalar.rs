//! Floating-point scalar abstraction.
//!
//! Every numeric structure in this crate (domains, histograms, cluster
//! models, estimators) is generic over a [`Real`] scalar so the same code
//! runs in single or double precision. Applications that do not care pick
//! the `f64` aliases exported from the crate root.

use core::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable as the value type of histograms, cluster
/// models and estimators.
///
/// The trait bundles the `num-traits` capabilities the library needs
/// (IEEE arithmetic plus lossless-enough conversions from configuration
/// values, which are plain `f64`) together with the threading and
/// formatting bounds required by the sweep runner and error messages.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lazy-decay scale below which a histogram folds the scale back into
    /// its bin weights.
    ///
    /// The forgetting update multiplies one global scale by the forgetting
    /// factor instead of touching every bin; the scale therefore decays
    /// geometrically and must be flushed before it underflows. The
    /// threshold is chosen per type to leave ample headroom above the
    /// smallest positive normal value.
    fn renorm_threshold() -> Self;

    /// Converts a configuration value, panicking only for scalars that
    /// cannot represent ordinary finite `f64` magnitudes (none of the
    /// provided impls do).
    #[inline]
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 must convert into a Real scalar")
    }
}

impl Real for f64 {
    #[inline]
    fn renorm_threshold() -> Self {
        1e-300
    }
}

impl Real for f32 {
    #[inline]
    fn renorm_threshold() -> Self {
        1e-30
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_are_far_above_underflow() {
        assert!(f64::renorm_threshold() > f64::MIN_POSITIVE * 1e6);
        assert!(f32::renorm_threshold() > f32::MIN_POSITIVE * 1e6);
    }

    #[test]
    fn config_conversion_round_trips_for_f64() {
        let x = 0.980_392_156_862_745_1_f64;
        assert_eq!(f64::from_config(x), x);
    }
}
