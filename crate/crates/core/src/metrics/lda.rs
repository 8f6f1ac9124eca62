use nalgebra::{DMatrix, DVector};

use super::{MatrixView, MetricError};

pub const DEFAULT_SHRINKAGE: f64 = 0.1;

/// Mean log posterior of the true class under a shared-covariance Gaussian
/// classifier fitted on the same samples.
///
/// The pooled within-class scatter is normalised by `N - K` and shrunk
/// towards `tr(S)/D * I` by `shrinkage`. Classes are `0..=max(label)` and
/// every one of them must be populated.
pub fn lda_separability(features: MatrixView<'_>, labels: &[i64], shrinkage: f64) -> Result<f64, MetricError> {
    let (n, d) = (features.rows(), features.cols());
    if labels.len() != n {
        return Err(MetricError::DimensionMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(MetricError::InvalidParameter(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    if n == 0 || d == 0 {
        return Err(MetricError::EmptyInput);
    }
    if let Some(bad) = labels.iter().find(|&&l| l < 0) {
        return Err(MetricError::DegenerateLabels(format!("label {bad} is negative")));
    }
    let k = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut counts = vec![0usize; k];
    for &l in labels {
        counts[l as usize] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(MetricError::DegenerateLabels(format!("class {empty} has no samples")));
    }
    if k < 2 {
        return Err(MetricError::DegenerateLabels("need at least 2 classes".into()));
    }
    if n <= k {
        return Err(MetricError::DegenerateLabels(format!("{n} samples cannot fit {k} classes")));
    }

    let x = features.to_dmatrix();
    let mut means = DMatrix::<f64>::zeros(k, d);
    for (i, &l) in labels.iter().enumerate() {
        let mut row = means.row_mut(l as usize);
        row += x.row(i);
    }
    for (c, &count) in counts.iter().enumerate() {
        let mut row = means.row_mut(c);
        row /= count as f64;
    }

    let mut centered = x.clone();
    for (i, &l) in labels.iter().enumerate() {
        let mut row = centered.row_mut(i);
        row -= means.row(l as usize);
    }
    let pooled = (centered.transpose() * &centered) / (n - k) as f64;
    let scale = pooled.trace() / d as f64;
    let shared = pooled * (1.0 - shrinkage) + DMatrix::identity(d, d) * (shrinkage * scale);

    let chol = shared
        .cholesky()
        .filter(|c| {
            let diag = c.l().diagonal();
            let max = diag.max();
            max > 0.0 && diag.min() > max * 1e-7
        })
        .ok_or(MetricError::SingularCovariance { shrinkage })?;

    // Whitened coordinates: q_c(x) = |L^-1 (x - mu_c)|^2
    let white_x = chol.l().solve_lower_triangular(&x.transpose()).expect("non-singular L");
    let white_means = chol.l().solve_lower_triangular(&means.transpose()).expect("non-singular L");
    let log_priors: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();

    let mut total = 0.0;
    let mut scores = vec![0.0f64; k];
    for (i, &l) in labels.iter().enumerate() {
        let xi: DVector<f64> = white_x.column(i).into_owned();
        for (c, s) in scores.iter_mut().enumerate() {
            *s = log_priors[c] - 0.5 * (&xi - white_means.column(c)).norm_squared();
        }
        let max = scores.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += scores[l as usize] - lse;
    }
    Ok((total / n as f64).min(0.0))
}
