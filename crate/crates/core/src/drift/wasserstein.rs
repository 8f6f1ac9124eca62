use super::DriftError;
use crate::tensor_io::WeightSnapshot;

/// Uniform empirical measure over a finite multiset of reals, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(samples: impl IntoIterator<Item = f64>) -> Result<Self, DriftError> {
        let mut sorted: Vec<f64> = samples.into_iter().collect();
        if sorted.is_empty() {
            return Err(DriftError::EmptyDistribution);
        }
        if let Some(index) = sorted.iter().position(|v| !v.is_finite()) {
            return Err(DriftError::NonFiniteSample { index });
        }
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn from_snapshot(snapshot: &WeightSnapshot) -> Result<Self, DriftError> {
        Self::new(snapshot.values().map(f64::from))
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

/// Exact 1-Wasserstein distance between two empirical measures on the line,
/// `integral_0^1 |F_p^-1(u) - F_q^-1(u)| du`.
///
/// Equal sizes reduce to the mean absolute difference of the sorted samples.
/// Otherwise both quantile functions are step functions with breakpoints at
/// `i/n` and `j/m`; working on the common grid `1/(n m)` keeps every
/// breakpoint exact.
pub fn wasserstein_1d(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    let (a, b) = (p.sorted(), q.sorted());
    let (n, m) = (a.len(), b.len());
    if n == m {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
    }
    let (n128, m128) = (n as u128, m as u128);
    let total_mass = n128 * m128;
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos: u128 = 0;
    let mut acc = 0.0;
    while pos < total_mass {
        let next_a = (i as u128 + 1) * m128;
        let next_b = (j as u128 + 1) * n128;
        let next = next_a.min(next_b);
        acc += (next - pos) as f64 * (a[i] - b[j]).abs();
        pos = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    acc / total_mass as f64
}

/// Mean of per-segment distances; requires identical segment structure.
pub fn wasserstein_per_segment(a: &WeightSnapshot, b: &WeightSnapshot) -> Result<f64, DriftError> {
    if !a.same_structure(b) {
        return Err(DriftError::StructureMismatch(
            "per-segment distance needs matching segment names and lengths".into(),
        ));
    }
    let mut total = 0.0;
    for (sa, sb) in a.segments().iter().zip(b.segments()) {
        if sa.values.is_empty() {
            continue;
        }
        let pa = EmpiricalDistribution::new(sa.values.iter().map(|&v| f64::from(v)))?;
        let pb = EmpiricalDistribution::new(sb.values.iter().map(|&v| f64::from(v)))?;
        total += wasserstein_1d(&pa, &pb);
    }
    let populated = a.segments().iter().filter(|s| !s.values.is_empty()).count();
    Ok(total / populated as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::Segment;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn identical_multisets() {
        assert_eq!(wasserstein_1d(&dist(&[3.0, 1.0, 2.0]), &dist(&[2.0, 3.0, 1.0])), 0.0);
    }

    #[test]
    fn sorted_pairing() {
        assert_eq!(wasserstein_1d(&dist(&[0.0, 1.0]), &dist(&[1.0, 2.0])), 1.0);
    }

    #[test]
    fn unequal_sizes() {
        assert_eq!(wasserstein_1d(&dist(&[0.0]), &dist(&[0.0, 1.0])), 0.5);
        assert_eq!(wasserstein_1d(&dist(&[0.0, 1.0]), &dist(&[0.0])), 0.5);
        // {0,0,3} vs {0,3}: quantiles differ on (1/2, 2/3) by 3
        assert!((wasserstein_1d(&dist(&[0.0, 0.0, 3.0]), &dist(&[0.0, 3.0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shift_property() {
        let x = [0.3, -1.7, 2.25, 9.0, 0.0];
        for c in [-3.5, 0.125, 7.0] {
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let w = wasserstein_1d(&dist(&x), &dist(&shifted));
            assert!((w - f64::abs(c)).abs() < 1e-9, "c={c}: {w}");
        }
    }

    #[test]
    fn empty_and_non_finite() {
        assert_eq!(EmpiricalDistribution::new(Vec::<f64>::new()), Err(DriftError::EmptyDistribution));
        assert_eq!(EmpiricalDistribution::new([1.0, f64::NAN]), Err(DriftError::NonFiniteSample { index: 1 }));
    }

    #[test]
    fn per_segment_mean() {
        let a = WeightSnapshot::new(vec![
            Segment { name: "w".into(), values: vec![0.0, 1.0] },
            Segment { name: "b".into(), values: vec![0.0] },
        ])
        .unwrap();
        let b = WeightSnapshot::new(vec![
            Segment { name: "w".into(), values: vec![1.0, 2.0] },
            Segment { name: "b".into(), values: vec![3.0] },
        ])
        .unwrap();
        assert_eq!(wasserstein_per_segment(&a, &b).unwrap(), 2.0);
    }
}
