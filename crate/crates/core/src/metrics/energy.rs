use super::{MatrixView, MetricError};

/// Mean per-sample `logsumexp` of the source logits (negative free energy).
pub fn energy_score(logits: MatrixView<'_>) -> Result<f64, MetricError> {
    let (n, c) = (logits.rows(), logits.cols());
    if n == 0 || c == 0 {
        return Err(MetricError::EmptyInput);
    }
    let total: f64 = (0..n).map(|i| logsumexp(logits.row(i))).sum();
    Ok(total / n as f64)
}

fn logsumexp(row: &[f32]) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
    let sum: f64 = row.iter().map(|&v| (f64::from(v) - max).exp()).sum();
    max + sum.ln()
}
