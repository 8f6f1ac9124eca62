use super::wasserstein::{wasserstein_1d, wasserstein_per_segment, EmpiricalDistribution};
use super::DriftError;
use crate::metrics::MetricId;
use crate::tensor_io::WeightSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

/// How snapshot values are turned into distributions for the Wasserstein
/// score. `Pooled` treats every parameter as one sample of one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftMode {
    #[default]
    Pooled,
    PerSegment,
}

/// `L1 = mean |a_i - b_i|`, `L2 = sqrt(mean (a_i - b_i)^2)` over aligned values.
pub fn elementwise_distance(a: &WeightSnapshot, b: &WeightSnapshot, norm: Norm) -> Result<f64, DriftError> {
    if !a.same_structure(b) {
        return Err(DriftError::StructureMismatch(format!(
            "snapshots differ in layout ({} vs {} values)",
            a.total_len(),
            b.total_len()
        )));
    }
    let n = a.total_len() as f64;
    let diffs = a.values().zip(b.values()).map(|(x, y)| f64::from(x) - f64::from(y));
    Ok(match norm {
        Norm::L1 => diffs.map(f64::abs).sum::<f64>() / n,
        Norm::L2 => (diffs.map(|d| d * d).sum::<f64>() / n).sqrt(),
    })
}

/// Negated drift distance: zero when nothing moved, negative otherwise.
///
/// The Wasserstein variant compares the pooled value multisets and so
/// accepts snapshots of different sizes; L1/L2 need aligned layouts.
pub fn drift_score(theta0: &WeightSnapshot, theta1: &WeightSnapshot, metric: MetricId) -> Result<f64, DriftError> {
    drift_score_with_mode(theta0, theta1, metric, DriftMode::Pooled)
}

pub fn drift_score_with_mode(
    theta0: &WeightSnapshot,
    theta1: &WeightSnapshot,
    metric: MetricId,
    mode: DriftMode,
) -> Result<f64, DriftError> {
    let distance = match (metric, mode) {
        (MetricId::WassersteinDrift, DriftMode::Pooled) => wasserstein_1d(
            &EmpiricalDistribution::from_snapshot(theta0)?,
            &EmpiricalDistribution::from_snapshot(theta1)?,
        ),
        (MetricId::WassersteinDrift, DriftMode::PerSegment) => wasserstein_per_segment(theta0, theta1)?,
        (MetricId::L1Drift, _) => elementwise_distance(theta0, theta1, Norm::L1)?,
        (MetricId::L2Drift, _) => elementwise_distance(theta0, theta1, Norm::L2)?,
        (other, _) => return Err(DriftError::NotADriftMetric(other)),
    };
    // `0.0 - d` rather than `-d` so that no drift scores +0.0
    Ok(0.0 - distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::Segment;

    fn snap(v: &[f32]) -> WeightSnapshot {
        WeightSnapshot::new(vec![Segment { name: "p".into(), values: v.to_vec() }]).unwrap()
    }

    #[test]
    fn equal_snapshots() {
        let a = snap(&[0.5, -1.0, 2.0]);
        for norm in [Norm::L1, Norm::L2] {
            assert_eq!(elementwise_distance(&a, &a, norm).unwrap(), 0.0);
        }
        for m in [MetricId::WassersteinDrift, MetricId::L1Drift, MetricId::L2Drift] {
            let s = drift_score(&a, &a, m).unwrap();
            assert_eq!(s.to_bits(), 0.0f64.to_bits());
        }
    }

    #[test]
    fn unit_shift() {
        let (a, b) = (snap(&[0.0; 4]), snap(&[1.0; 4]));
        assert_eq!(elementwise_distance(&a, &b, Norm::L1).unwrap(), 1.0);
        assert_eq!(elementwise_distance(&a, &b, Norm::L2).unwrap(), 1.0);
    }

    #[test]
    fn l1_l2_differ() {
        let (a, b) = (snap(&[0.0, 0.0]), snap(&[0.0, 2.0]));
        assert_eq!(elementwise_distance(&a, &b, Norm::L1).unwrap(), 1.0);
        assert!((elementwise_distance(&a, &b, Norm::L2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_drift_value() {
        let s = drift_score(&snap(&[0.0, 1.0]), &snap(&[1.0, 2.0]), MetricId::WassersteinDrift).unwrap();
        assert_eq!(s, -1.0);
    }

    #[test]
    fn permutation_is_invisible_to_wasserstein_only() {
        let (a, b) = (snap(&[1.0, 2.0, 3.0]), snap(&[3.0, 1.0, 2.0]));
        assert_eq!(drift_score(&a, &b, MetricId::WassersteinDrift).unwrap(), 0.0);
        assert!(drift_score(&a, &b, MetricId::L1Drift).unwrap() < 0.0);
    }

    #[test]
    fn structure_mismatch() {
        let (a, b) = (snap(&[1.0, 2.0]), snap(&[1.0, 2.0, 3.0]));
        assert!(matches!(drift_score(&a, &b, MetricId::L2Drift), Err(DriftError::StructureMismatch(_))));
        assert!(drift_score(&a, &b, MetricId::WassersteinDrift).is_ok());
        assert_eq!(drift_score(&a, &a, MetricId::Leep), Err(DriftError::NotADriftMetric(MetricId::Leep)));
    }
}
