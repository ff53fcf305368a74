//! Property tests for the measure layer: monotonicity and subadditivity of
//! the modulus, support containment of samples, and the statistical
//! agreement between the modulus and empirical sliding-window masses.

use proptest::prelude::*;
use wegnerlab::measures::{FilterCoefficient, MeasureSpec};
use wegnerlab::seeding::substream;

fn arb_measure() -> impl Strategy<Value = MeasureSpec> {
    prop_oneof![
        (any::<f64>(), any::<f64>()).prop_filter_map("finite ordered", |(a, b)| {
            let (a, b) = (a.rem_euclid(10.0) - 5.0, b.rem_euclid(10.0) - 5.0);
            let (lo, hi) = (a.min(b), a.max(b));
            (hi - lo > 1e-3).then(|| MeasureSpec::uniform(lo, hi).unwrap())
        }),
        (1u32..=30).prop_map(|depth| MeasureSpec::cantor(depth).unwrap()),
        proptest::collection::vec(0.0f64..1.0, 1..6).prop_map(|raw| {
            let total: f64 = raw.iter().map(|w| w + 0.01).sum();
            let atoms: Vec<(f64, f64)> = raw
                .iter()
                .enumerate()
                .map(|(i, w)| (i as f64 * 0.37, (w + 0.01) / total))
                .collect();
            MeasureSpec::atomic(atoms).unwrap()
        }),
        (0.1f64..3.0, 0.0f64..0.9).prop_map(|(a0, frac)| {
            MeasureSpec::toeplitz(
                MeasureSpec::uniform(0.0, 1.0).unwrap(),
                vec![
                    FilterCoefficient {
                        offset: vec![0],
                        alpha: a0,
                    },
                    FilterCoefficient {
                        offset: vec![1],
                        alpha: a0 * frac * 0.99,
                    },
                ],
            )
            .unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modulus_monotone(measure in arb_measure(), e1 in 1e-4f64..2.0, factor in 1.0f64..8.0) {
        let e2 = e1 * factor;
        let s1 = measure.modulus_s(e1).unwrap();
        let s2 = measure.modulus_s(e2).unwrap();
        prop_assert!(
            s1.value <= s2.value + s1.error_bound + s2.error_bound,
            "s({e1}) = {} > s({e2}) = {}", s1.value, s2.value
        );
        prop_assert!(s1.value <= 1.0 + 1e-12);
    }

    #[test]
    fn modulus_subadditive(measure in arb_measure(), e1 in 1e-3f64..1.0, e2 in 1e-3f64..1.0) {
        // A window of width e1+e2 splits into two windows.
        let s12 = measure.modulus_s(e1 + e2).unwrap();
        let s1 = measure.modulus_s(e1).unwrap();
        let s2 = measure.modulus_s(e2).unwrap();
        let float_slack = 1e-12 * (1.0 + s1.value + s2.value);
        prop_assert!(
            s12.value
                <= s1.value + s2.value + s12.error_bound + s1.error_bound + s2.error_bound
                    + float_slack,
            "s({}) = {} > {} + {}", e1 + e2, s12.value, s1.value, s2.value
        );
    }

    #[test]
    fn samples_in_support(measure in arb_measure(), seed in any::<u64>()) {
        let (lo, hi) = measure.support();
        let mut rng = substream(seed, &[1]);
        for _ in 0..64 {
            let x = measure.sample(&mut rng);
            prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9, "{x} outside [{lo}, {hi}]");
        }
    }
}

#[test]
fn modulus_dominates_empirical_window_masses() {
    // s(ε) + error bound must dominate the empirical mass of every window of
    // width ε in a 10⁵-sample draw, up to 3σ of the binomial fluctuation.
    let measures = [
        MeasureSpec::uniform(0.0, 1.0).unwrap(),
        MeasureSpec::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap(),
        MeasureSpec::cantor(30).unwrap(),
        MeasureSpec::atomic(vec![(0.1, 0.4), (0.5, 0.25), (0.8, 0.35)]).unwrap(),
    ];
    let n = 100_000usize;
    for measure in &measures {
        let mut rng = substream(515, &[2]);
        let mut xs: Vec<f64> = (0..n).map(|_| measure.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        for eps in [0.01, 0.05, 0.2] {
            let s = measure.modulus_s(eps).unwrap();
            // Empirical sup over sliding windows anchored at each sample.
            let mut best = 0usize;
            let mut j = 0usize;
            for i in 0..n {
                if j < i {
                    j = i;
                }
                while j < n && xs[j] <= xs[i] + eps {
                    j += 1;
                }
                best = best.max(j - i);
            }
            let empirical = best as f64 / n as f64;
            let sigma = (s.value.max(1e-4) * (1.0 - s.value).max(0.0) / n as f64)
                .sqrt()
                .max(1.0 / n as f64);
            // The empirical sup is a max over ~width/ε overlapping windows;
            // allow the extreme-value inflation sqrt(2 ln m) on top of 3σ.
            let (lo, hi) = measure.support();
            let m = ((hi - lo) / eps).max(2.0);
            let allowance = (3.0 + (2.0 * m.ln()).sqrt()) * sigma;
            assert!(
                s.value + s.error_bound + allowance >= empirical,
                "{measure:?} at eps {eps}: modulus {} + err {} < empirical {empirical}",
                s.value,
                s.error_bound
            );
        }
    }
}

#[test]
fn toeplitz_marginal_matches_two_site_convolution() {
    // Marginal law of η = α₀ω₀ + α₁ω₁ against a brute-force discretized
    // convolution of the base measure with itself.
    let base = MeasureSpec::uniform(0.0, 1.0).unwrap();
    let corr = MeasureSpec::toeplitz(
        base,
        vec![
            FilterCoefficient {
                offset: vec![0],
                alpha: 2.0,
            },
            FilterCoefficient {
                offset: vec![1],
                alpha: 0.5,
            },
        ],
    )
    .unwrap();
    let mut rng = substream(99, &[0]);
    let n = 50_000;
    let samples: Vec<f64> = (0..n).map(|_| corr.sample(&mut rng)).collect();
    // η = 2·U + 0.5·U′: cdf by numeric convolution on a fine grid.
    let grid = 4000usize;
    let cdf = |x: f64| -> f64 {
        let mut acc = 0.0;
        for k in 0..grid {
            let u = (k as f64 + 0.5) / grid as f64;
            acc += ((x - 2.0 * u) / 0.5).clamp(0.0, 1.0);
        }
        acc / grid as f64
    };
    let mut sorted = samples;
    sorted.sort_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        ks = ks
            .max((f - i as f64 / n as f64).abs())
            .max((f - (i + 1) as f64 / n as f64).abs());
    }
    assert!(ks < 0.015, "KS distance {ks} for the correlated marginal");
}
