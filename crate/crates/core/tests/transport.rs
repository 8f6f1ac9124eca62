use proptest::prelude::*;
use xferbench_core::drift::{drift_score, wasserstein_1d, EmpiricalDistribution};
use xferbench_core::metrics::MetricId;
use xferbench_core::oracles::transport_lp;
use xferbench_core::tensor_io::{Segment, WeightSnapshot};

fn dist(v: &[f64]) -> EmpiricalDistribution {
    EmpiricalDistribution::new(v.iter().copied()).unwrap()
}

fn support(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![-10.0f64..10.0, (-4i32..4).prop_map(f64::from)], 1..=max)
}

fn snapshot(v: Vec<f32>) -> WeightSnapshot {
    WeightSnapshot::new(vec![Segment { name: "p".into(), values: v }]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_transport_lp(p in support(6), q in support(6)) {
        let w = wasserstein_1d(&dist(&p), &dist(&q));
        let lp = transport_lp(&p, &q);
        prop_assert!((w - lp).abs() <= 1e-9, "quantile {w} vs lp {lp}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metric_axioms(a in support(64), b in support(64), c in support(64)) {
        let (da, db, dc) = (dist(&a), dist(&b), dist(&c));
        let ab = wasserstein_1d(&da, &db);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein_1d(&db, &da)).abs() <= 1e-9);
        prop_assert_eq!(wasserstein_1d(&da, &da), 0.0);
        let ac = wasserstein_1d(&da, &dc);
        let cb = wasserstein_1d(&dc, &db);
        prop_assert!(ab <= ac + cb + 1e-9, "{ab} > {ac} + {cb}");
    }

    #[test]
    fn shift(a in support(64), c in -50.0f64..50.0) {
        let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
        prop_assert!((wasserstein_1d(&dist(&a), &dist(&shifted)) - c.abs()).abs() <= 1e-9);
    }

    #[test]
    fn positive_distance_for_different_multisets(a in support(16), b in support(16)) {
        let mut sa = a.clone();
        let mut sb = b.clone();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let w = wasserstein_1d(&dist(&a), &dist(&b));
        // uniform measures agree exactly when the sorted multisets agree up to repetition
        if sa == sb {
            prop_assert_eq!(w, 0.0);
        }
        if w == 0.0 {
            prop_assert!(transport_lp(&a, &b).abs() <= 1e-12);
        }
    }

    #[test]
    fn drift_score_is_non_positive(a in prop::collection::vec(-5.0f32..5.0, 1..50), noise in prop::collection::vec(-1.0f32..1.0, 50)) {
        let b: Vec<f32> = a.iter().zip(&noise).map(|(x, n)| x + n).collect();
        let (sa, sb) = (snapshot(a.clone()), snapshot(b.clone()));
        for metric in [MetricId::WassersteinDrift, MetricId::L1Drift, MetricId::L2Drift] {
            let s = drift_score(&sa, &sb, metric).unwrap();
            prop_assert!(s <= 0.0);
            let equal = if metric == MetricId::WassersteinDrift {
                let (mut x, mut y) = (a.clone(), b.clone());
                x.sort_by(f32::total_cmp);
                y.sort_by(f32::total_cmp);
                x == y
            } else {
                a == b
            };
            prop_assert_eq!(s == 0.0, equal);
            prop_assert_eq!(drift_score(&sa, &sa, metric).unwrap(), 0.0);
        }
    }

    #[test]
    fn permuted_snapshot_has_zero_wasserstein_drift(a in prop::collection::vec(-5.0f32..5.0, 2..50)) {
        let mut b = a.clone();
        b.reverse();
        prop_assert_eq!(drift_score(&snapshot(a), &snapshot(b), MetricId::WassersteinDrift).unwrap(), 0.0);
    }
}
