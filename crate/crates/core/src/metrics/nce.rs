use std::collections::BTreeMap;

use super::MetricError;

/// Negative conditional entropy `-H(Y | Z)` of target labels given source
/// (pseudo-)labels, natural log, with `0 log 0 = 0`.
pub fn nce(source_labels: &[i64], labels: &[i64]) -> Result<f64, MetricError> {
    if source_labels.len() != labels.len() {
        return Err(MetricError::LengthMismatch { left: source_labels.len(), right: labels.len() });
    }
    if labels.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = labels.len() as f64;
    let mut joint: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut marginal: BTreeMap<i64, usize> = BTreeMap::new();
    for (&z, &y) in source_labels.iter().zip(labels) {
        *joint.entry((z, y)).or_default() += 1;
        *marginal.entry(z).or_default() += 1;
    }
    let value: f64 = joint
        .iter()
        .map(|(&(z, _), &count)| {
            let count = count as f64;
            (count / n) * (count / marginal[&z] as f64).ln()
        })
        .sum();
    Ok(value.min(0.0))
}
