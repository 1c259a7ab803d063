//! Property-based invariants, each checked against an independently coded
//! oracle where one exists. The oracles here are deliberately naive —
//! physical per-bin decay, linear threshold scans, exhaustive nearest-
//! centroid search — so that any cleverness in the library (lazy scaling,
//! binary search, incremental totals) has something honest to answer to.

use proptest::prelude::*;

use ustpi::{
    downsample, picp, pinaw, windowed_error_rates, BacktestRecord, ClusterModel, Estimator,
    EstimatorConfig, FeatureSpec, ForgettingHistogram, Pi, QuantizedDomain, TimeSeries, Variant,
};

// ---------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------

fn arb_domain() -> impl Strategy<Value = QuantizedDomain<f64>> {
    (-1.0e3..1.0e3f64, 1.0e-3..1.0e3f64, 2usize..64).prop_map(|(lo, width, bins)| {
        QuantizedDomain::new(lo, lo + width, bins).expect("valid by construction")
    })
}

/// Non-negative weights with at least one strictly positive entry.
fn arb_weights(bins: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        proptest::collection::vec(0.0..10.0f64, bins),
        0..bins,
        0.1..10.0f64,
    )
        .prop_map(|(mut w, hot, bump)| {
            w[hot] += bump;
            w
        })
}

fn arb_histogram() -> impl Strategy<Value = ForgettingHistogram<f64>> {
    arb_domain().prop_flat_map(|d| {
        arb_weights(d.n_bins())
            .prop_map(move |w| ForgettingHistogram::from_weights(d, w).expect("valid weights"))
    })
}

fn arb_alpha() -> impl Strategy<Value = f64> {
    0.001..0.999f64
}

// ---------------------------------------------------------------------
// Quantile extraction vs a linear-scan oracle
// ---------------------------------------------------------------------

/// Linear-scan reference for the CDF cuts: first bin whose cumulative mass
/// reaches (1-alpha)/2, last bin whose cumulative mass does not exceed
/// (1+alpha)/2, clamped to the lower cut when the upper set is empty or
/// the cuts cross.
fn oracle_quantile_pair(hist: &ForgettingHistogram<f64>, alpha: f64) -> (f64, f64) {
    let n = hist.domain().n_bins();
    let mut cumulative = Vec::with_capacity(n);
    let mut run = 0.0;
    for k in 0..n {
        run += hist.normalized_mass(k);
        cumulative.push(run);
    }
    let lo_threshold = (1.0 - alpha) / 2.0;
    let hi_threshold = (1.0 + alpha) / 2.0;

    let mut lower = n - 1;
    for (k, &c) in cumulative.iter().enumerate() {
        if c >= lo_threshold {
            lower = k;
            break;
        }
    }
    let mut upper = None;
    for (k, &c) in cumulative.iter().enumerate() {
        if c <= hi_threshold {
            upper = Some(k);
        }
    }
    let upper = upper.map_or(lower, |u| u.max(lower));
    (hist.domain().bin_value(lower), hist.domain().bin_value(upper))
}

proptest! {
    #[test]
    fn quantile_pair_matches_linear_scan_oracle(hist in arb_histogram(), alpha in arb_alpha()) {
        let got = hist.quantile_pair(alpha).unwrap();
        let want = oracle_quantile_pair(&hist, alpha);
        prop_assert_eq!(got, want, "alpha = {}", alpha);
    }

    #[test]
    fn intervals_almost_nest_with_alpha(hist in arb_histogram(), a in arb_alpha(), b in arb_alpha()) {
        // The lower cut is monotone in alpha outright. The upper cut is
        // monotone except in one corner: when both thresholds of the
        // narrower alpha fall inside a single CDF jump, its crossed bounds
        // are clamped to that bin, and a wider alpha's upper cut may sit
        // exactly one bin earlier. (Example: masses [0.45, 0.55] — a tiny
        // alpha clamps to the median bin 1, while a moderate one keeps
        // only bin 0, whose 0.45 lies between both of its thresholds.)
        let (narrow, wide) = if a <= b { (a, b) } else { (b, a) };
        let (nl, nu) = hist.quantile_pair(narrow).unwrap();
        let (wl, wu) = hist.quantile_pair(wide).unwrap();
        prop_assert!(nl <= nu);
        prop_assert!(wl <= nl, "wider alpha must not raise the lower bound");

        let d = hist.domain();
        let nu_bin = d.quantize(nu).unwrap();
        let wu_bin = d.quantize(wu).unwrap();
        if nl < nu {
            prop_assert!(wu_bin >= nu_bin, "non-degenerate upper bound must not retreat");
        } else {
            prop_assert!(wu_bin + 1 >= nu_bin, "clamped upper bound may retreat one bin at most");
        }
    }

    #[test]
    fn interval_bounds_stay_inside_the_domain(hist in arb_histogram(), alpha in arb_alpha()) {
        let (lo, hi) = hist.quantile_pair(alpha).unwrap();
        prop_assert!(hist.domain().p_min() <= lo);
        prop_assert!(hi <= hist.domain().p_max());
    }
}

// ---------------------------------------------------------------------
// Forgetting updates vs a physical per-bin oracle
// ---------------------------------------------------------------------

/// Reference implementation with no lazy scale: every update multiplies
/// every bin.
struct PhysicalHistogram {
    domain: QuantizedDomain<f64>,
    weights: Vec<f64>,
}

impl PhysicalHistogram {
    fn new(domain: QuantizedDomain<f64>) -> Self {
        let weights = vec![0.0; domain.n_bins()];
        Self { domain, weights }
    }

    fn seed(&mut self, values: &[f64]) {
        let share = 1.0 / values.len() as f64;
        for &v in values {
            self.weights[self.domain.quantize(v).unwrap()] += share;
        }
    }

    fn update(&mut self, value: f64, phi: f64) {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            self.weights[self.domain.quantize(value).unwrap()] = 1.0;
            return;
        }
        for w in &mut self.weights {
            *w *= phi;
        }
        self.weights[self.domain.quantize(value).unwrap()] += 1.0 - phi;
    }

    fn mass(&self, k: usize) -> f64 {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            0.0
        } else {
            self.weights[k] / total
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn lazy_scaled_updates_match_physical_decay(
        domain in arb_domain(),
        seed_vals in proptest::collection::vec(-1.0e3..1.0e3f64, 1..20),
        updates in proptest::collection::vec(-1.0e3..1.0e3f64, 0..300),
        phi in 0.3..0.999f64,
    ) {
        // Map raw draws into the domain so every value quantizes somewhere
        // meaningful (quantize clamps, so out-of-range would still work,
        // but in-range exercises more bins).
        let span = domain.p_max() - domain.p_min();
        let squeeze = |v: f64| domain.p_min() + (v + 1.0e3) / 2.0e3 * span;

        let seed_vals: Vec<f64> = seed_vals.iter().map(|&v| squeeze(v)).collect();
        let mut hist = ForgettingHistogram::new(domain);
        hist.seed_batch(&seed_vals).unwrap();
        let mut phys = PhysicalHistogram::new(domain);
        phys.seed(&seed_vals);

        for &u in &updates {
            let v = squeeze(u);
            hist.decay_update(v, phi).unwrap();
            phys.update(v, phi);
        }

        for k in 0..domain.n_bins() {
            let got = hist.normalized_mass(k);
            let want = phys.mass(k);
            prop_assert!(
                (got - want).abs() <= 1.0e-10 * want.max(1.0),
                "bin {}: lazy {} vs physical {}",
                k, got, want
            );
        }
        // Total probability stays 1.
        let total: f64 = (0..domain.n_bins()).map(|k| hist.normalized_mass(k)).sum();
        prop_assert!((total - 1.0).abs() < 1.0e-9);
    }

    #[test]
    fn single_seed_survival_follows_phi_to_the_m(
        phi in 0.5..0.999f64,
        m in 1usize..2_000,
    ) {
        // One seeded value, then m updates into a different bin: the seed
        // bin's mass must be phi^m exactly (up to accumulated rounding).
        let domain = QuantizedDomain::new(0.0, 10.0, 11).unwrap();
        let mut hist = ForgettingHistogram::new(domain);
        hist.seed_batch(&[2.0]).unwrap();
        for _ in 0..m {
            hist.decay_update(7.0, phi).unwrap();
        }
        let got = hist.normalized_mass(domain.quantize(2.0).unwrap());
        let want = phi.powi(m as i32);
        prop_assert!(
            (got - want).abs() <= 1.0e-9 * want,
            "phi = {}, m = {}: got {} want {}",
            phi, m, got, want
        );
    }
}

// ---------------------------------------------------------------------
// Quantization grid
// ---------------------------------------------------------------------

proptest! {
    #[test]
    fn quantize_inverts_bin_value(domain in arb_domain()) {
        for k in 0..domain.n_bins() {
            prop_assert_eq!(domain.quantize(domain.bin_value(k)).unwrap(), k);
        }
    }

    #[test]
    fn quantize_is_monotone(domain in arb_domain(), a in -2.0e3..2.0e3f64, b in -2.0e3..2.0e3f64) {
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(domain.quantize(x).unwrap() <= domain.quantize(y).unwrap());
    }

    #[test]
    fn quantize_picks_the_nearest_bin(domain in arb_domain(), v in -2.0e3..2.0e3f64) {
        let k = domain.quantize(v).unwrap();
        let here = (v - domain.bin_value(k)).abs();
        for other in [k.wrapping_sub(1), k + 1] {
            if other < domain.n_bins() {
                let there = (v - domain.bin_value(other)).abs();
                // Allow exact ties (round-half-away and endpoint clamping).
                prop_assert!(here <= there + 1.0e-12 * domain.p_max().abs().max(1.0));
            }
        }
    }
}

// ---------------------------------------------------------------------
// Cluster assignment vs exhaustive search
// ---------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn assignment_matches_exhaustive_nearest_centroid(
        raw in proptest::collection::vec((0i64..86_400_000, -1.0e4..1.0e4f64), 8..60),
        clusters in 1usize..6,
        seed in any::<u64>(),
        queries in proptest::collection::vec((0i64..86_400_000, -1.0e4..1.0e4f64), 1..40),
    ) {
        prop_assume!(raw.len() >= clusters);
        let spec = FeatureSpec::POWER_AND_TIME;
        let model = ClusterModel::fit(&raw, spec, clusters, seed).unwrap();

        for &(ts, p) in &queries {
            let got = model.assign_label(p, ts);
            // Oracle: exhaustive argmin over squared distances in feature
            // space, lowest index on ties.
            let f = model.features().extract(p, ts);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (j, c) in model.centroids().iter().enumerate() {
                let d = (f[0] - c[0]).powi(2) + (f[1] - c[1]).powi(2);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            prop_assert_eq!(got, best);
        }
    }
}

// ---------------------------------------------------------------------
// Downsampling
// ---------------------------------------------------------------------

proptest! {
    #[test]
    fn downsample_preserves_block_means(
        values in proptest::collection::vec(0.0..1.0e3f64, 4..200),
        k in 2usize..10,
    ) {
        prop_assume!(values.len() >= k);
        let s = TimeSeries::new(0, 20, values.clone()).unwrap();
        let d = downsample(&s, 20 * k as i64).unwrap();
        let n_blocks = values.len() / k;
        prop_assert_eq!(d.len(), n_blocks);
        for b in 0..n_blocks {
            let mean: f64 = values[b * k..(b + 1) * k].iter().sum::<f64>() / k as f64;
            prop_assert!((d.values()[b] - mean).abs() <= 1.0e-9);
            // Causality: the block's stamp is its last constituent sample.
            prop_assert_eq!(d.timestamp_ms(b), (b * k + k - 1) as i64 * 20);
        }
    }

    #[test]
    fn staged_downsampling_approximates_direct(
        values in proptest::collection::vec(0.0..1.0e3f64, 30..200),
        k1 in 2usize..5,
        k2 in 2usize..5,
    ) {
        let s = TimeSeries::new(0, 20, values).unwrap();
        let direct = downsample(&s, 20 * (k1 * k2) as i64).unwrap();
        let staged = downsample(&downsample(&s, 20 * k1 as i64).unwrap(), 20 * (k1 * k2) as i64)
            .unwrap();
        // Lengths can differ by trailing-block bookkeeping only when the
        // total is not a multiple of k1*k2; compare the common prefix.
        let common = direct.len().min(staged.len());
        prop_assert!(common > 0);
        for i in 0..common {
            prop_assert!((direct.values()[i] - staged.values()[i]).abs() <= 1.0e-9);
            prop_assert_eq!(direct.timestamp_ms(i), staged.timestamp_ms(i));
        }
    }

    #[test]
    fn staged_downsampling_is_exact_on_representable_inputs(
        ints in proptest::collection::vec(0i64..4_000, 40..160),
        k2 in 2usize..5,
    ) {
        // Multiples of 25 averaged over 5 divide exactly, and any binary
        // float halves/quarters exactly, so both routes must agree to the
        // bit, not merely within tolerance.
        let values: Vec<f64> = ints.iter().map(|&i| (i * 25) as f64).collect();
        let s = TimeSeries::new(0, 20, values).unwrap();
        let direct = downsample(&s, 20 * (5 * k2) as i64).unwrap();
        let staged = downsample(&downsample(&s, 100).unwrap(), 20 * (5 * k2) as i64).unwrap();
        let common = direct.len().min(staged.len());
        for i in 0..common {
            prop_assert_eq!(direct.values()[i], staged.values()[i]);
        }
    }
}

// ---------------------------------------------------------------------
// Metrics vs naive recomputation
// ---------------------------------------------------------------------

fn arb_records() -> impl Strategy<Value = Vec<BacktestRecord<f64>>> {
    proptest::collection::vec(
        (-1.0e3..1.0e3f64, -1.0e3..1.0e3f64, 0.0..500.0f64),
        1..200,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (power, center, half))| BacktestRecord {
                timestamp_ms: i as i64 * 1_000,
                power,
                intervals: vec![Pi {
                    alpha: 0.9,
                    lower: center - half,
                    upper: center + half,
                }],
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn picp_matches_the_miss_complement(records in arb_records()) {
        let misses = records
            .iter()
            .filter(|r| r.power < r.intervals[0].lower || r.power > r.intervals[0].upper)
            .count();
        let want = 1.0 - misses as f64 / records.len() as f64;
        prop_assert!((picp(&records, 0.9).unwrap() - want).abs() <= 1.0e-15);
    }

    #[test]
    fn pinaw_matches_reverse_order_summation(records in arb_records()) {
        let nominal = 250.0;
        let mut sum = 0.0;
        for r in records.iter().rev() {
            sum += (r.intervals[0].upper - r.intervals[0].lower) / nominal;
        }
        let want = sum / records.len() as f64;
        let got = pinaw(&records, 0.9, nominal).unwrap();
        prop_assert!((got - want).abs() <= 1.0e-12 * want.max(1.0));
    }

    #[test]
    fn window_rates_weighted_by_count_recover_total_miss_rate(
        records in arb_records(),
        window_s in 0.5..20.0f64,
    ) {
        let rates = windowed_error_rates(&records, 0.9, window_s).unwrap();
        // Recount window populations the same way the function buckets them.
        let window_ms = (window_s * 1000.0).round().max(1.0) as i64;
        let t0 = records[0].timestamp_ms;
        let mut counts: Vec<usize> = Vec::new();
        let mut current = 0i64;
        let mut n = 0usize;
        for r in &records {
            let w = (r.timestamp_ms - t0) / window_ms;
            if w != current {
                counts.push(n);
                current = w;
                n = 0;
            }
            n += 1;
        }
        counts.push(n);
        prop_assert_eq!(counts.len(), rates.len());

        let weighted: f64 = rates
            .iter()
            .zip(&counts)
            .map(|(r, &c)| r * c as f64)
            .sum::<f64>()
            / records.len() as f64;
        let total_miss = 1.0 - picp(&records, 0.9).unwrap();
        prop_assert!((weighted - total_miss).abs() <= 1.0e-12);
    }
}

// ---------------------------------------------------------------------
// Estimator stream behavior
// ---------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn step_mutates_exactly_like_observe(
        history in proptest::collection::vec(0.0..100.0f64, 10..60),
        live in proptest::collection::vec(0.0..100.0f64, 1..40),
        variant_b in any::<bool>(),
        clusters in 1usize..4,
    ) {
        prop_assume!(history.len() >= clusters.max(2));
        let config = EstimatorConfig {
            variant: if variant_b { Variant::Differential } else { Variant::Absolute },
            clusters,
            forgetting_time_s: 0.5,
            domain_bins: 51,
            ..EstimatorConfig::default()
        };
        let series = TimeSeries::new(0, 20, history.clone()).unwrap();
        let mut via_step = Estimator::batch_train(&config, &series).unwrap();
        let mut via_observe = via_step.clone();

        for (i, &v) in live.iter().enumerate() {
            let ts = (history.len() + i) as i64 * 20;
            via_step.step(ts, v, &[0.9]).unwrap();
            via_observe.observe(ts, v).unwrap();
            prop_assert_eq!(&via_step, &via_observe, "divergence at live step {}", i);
        }
    }

    #[test]
    fn emitted_intervals_never_leak_the_current_reading(
        history in proptest::collection::vec(0.0..100.0f64, 10..60),
        live in proptest::collection::vec(0.0..100.0f64, 2..30),
    ) {
        // Two futures that share a prefix: intervals at the step where they
        // first differ must be identical, whatever the differing values are.
        let config = EstimatorConfig {
            forgetting_time_s: 0.5,
            domain_bins: 51,
            ..EstimatorConfig::default()
        };
        let series = TimeSeries::new(0, 20, history.clone()).unwrap();
        let mut a = Estimator::batch_train(&config, &series).unwrap();
        let mut b = a.clone();

        let split = live.len() / 2;
        for (i, &v) in live[..split].iter().enumerate() {
            let ts = (history.len() + i) as i64 * 20;
            a.step(ts, v, &[0.95]).unwrap();
            b.step(ts, v, &[0.95]).unwrap();
        }
        let ts = (history.len() + split) as i64 * 20;
        let ia = a.step(ts, live[split], &[0.95]).unwrap();
        let ib = b.step(ts, live[split] * 0.5 + 7.0, &[0.95]).unwrap();
        prop_assert_eq!(ia, ib);
    }
}
