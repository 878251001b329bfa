mod common;

use proptest::prelude::*;
use tlshrink::baselines::{sps_fit, trans_lasso_means, TransLassoConfig};
use tlshrink::classical::js_shrink;
use tlshrink::shrinkage::{shrinkage_weight, WeightParams};
use tlshrink::SufficientStats;

#[test]
fn quadrature_weight_suite() {
    common::quadrature_suite().unwrap();
}

fn stats_strategy() -> impl Strategy<Value = SufficientStats> {
    (3usize..12, 1u64..200, 1u64..50, 0.1f64..3.0).prop_flat_map(|(p, n1, n2, sigma)| {
        (
            prop::collection::vec(-5.0f64..5.0, p),
            prop::collection::vec(-5.0f64..5.0, p),
        )
            .prop_map(move |(a, b)| SufficientStats::new(a, b, n1, n2, sigma).unwrap())
    })
}

// (n₁‖Ȳ₁−β₁‖² + n₂‖Ȳ₂−β₁−δ‖² + λ‖δ‖²) per coordinate, minimised over β₁ by
// golden-section search on δ with β₁ profiled out.
fn sps_numeric(y1: f64, y2: f64, n1: f64, n2: f64, lambda: f64) -> f64 {
    let profile = |d: f64| {
        let b1 = (n1 * y1 + n2 * (y2 - d)) / (n1 + n2);
        (
            b1,
            n1 * (y1 - b1).powi(2) + n2 * (y2 - b1 - d).powi(2) + lambda * d * d,
        )
    };
    let (mut lo, mut hi) = (-20.0f64, 20.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if profile(a).1 < profile(b).1 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let d = 0.5 * (lo + hi);
    profile(d).0 + d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weight_is_even_bounded_and_monotone(z in 0.0f64..40.0, dz in 0.01f64..5.0, tau in 1e-4f64..1.0, sn2 in 0.05f64..4.0) {
        let params = WeightParams::new(tau, sn2).unwrap();
        let w = shrinkage_weight(z, &params);
        prop_assert!(w > 0.0 && w < 1.0);
        prop_assert_eq!(w, shrinkage_weight(-z, &params));
        prop_assert!(shrinkage_weight(z + dz, &params) > w);
    }

    #[test]
    fn js_is_scale_consistent(x in prop::collection::vec(-10.0f64..10.0, 3..20), v in 0.01f64..2.0, c in 0.1f64..10.0) {
        prop_assume!(x.iter().map(|a| a * a).sum::<f64>() > 1e-6);
        let base = js_shrink(&x, v).unwrap();
        let scaled: Vec<f64> = x.iter().map(|a| c * a).collect();
        let out = js_shrink(&scaled, c * c * v).unwrap();
        for (a, b) in out.iter().zip(&base) {
            prop_assert!((a - c * b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn sps_path_moves_monotonically_toward_pooling(s in stats_strategy(), l1 in 0.0f64..50.0, dl in 0.0f64..50.0) {
        let a = sps_fit(&s, l1);
        let b = sps_fit(&s, l1 + dl);
        let pooled = sps_fit(&s, f64::INFINITY);
        let target = sps_fit(&s, 0.0);
        for j in 0..s.p() {
            prop_assert!((target[j] - s.ybar2[j]).abs() < 1e-9);
            // Every fit lies between Ȳ₂ and the pooled mean, further from Ȳ₂ as λ grows.
            let span = pooled[j] - target[j];
            let ta = if span == 0.0 { 0.0 } else { (a[j] - target[j]) / span };
            let tb = if span == 0.0 { 0.0 } else { (b[j] - target[j]) / span };
            prop_assert!((-1e-9..=1.0 + 1e-9).contains(&ta));
            prop_assert!(tb >= ta - 1e-9);
        }
    }

    #[test]
    fn sps_matches_a_numeric_minimiser(s in stats_strategy(), lambda in 0.0f64..100.0) {
        let fit = sps_fit(&s, lambda);
        for j in 0..s.p() {
            let num = sps_numeric(s.ybar1[j], s.ybar2[j], s.n1 as f64, s.n2 as f64, lambda);
            prop_assert!((fit[j] - num).abs() < 1e-6, "{} vs {}", fit[j], num);
        }
    }

    #[test]
    fn trans_lasso_without_penalty_is_the_target_mean(s in stats_strategy()) {
        let out = trans_lasso_means(&s, &TransLassoConfig::fixed(0.0, 0.0)).unwrap();
        for (a, b) in out.point.iter().zip(&s.ybar2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
