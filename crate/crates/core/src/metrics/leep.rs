use super::{MatrixView, MetricError};

const SIMPLEX_TOL: f64 = 1e-5;

/// Row-wise softmax with max subtraction, returned as f32 for LEEP input.
pub fn softmax_rows(logits: MatrixView<'_>) -> Vec<f32> {
    let mut out = Vec::with_capacity(logits.rows() * logits.cols());
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
        let exps: Vec<f64> = row.iter().map(|&v| (f64::from(v) - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| (e / sum) as f32));
    }
    out
}

/// Log expected empirical prediction of the target labels through the
/// source-class posterior `source_probs`.
///
/// Rows are checked against the simplex at `1e-5` and then renormalized in
/// f64, so f32 rounding in the input cannot push a log term above zero.
pub fn leep(source_probs: MatrixView<'_>, labels: &[i64]) -> Result<f64, MetricError> {
    let (n, cs) = (source_probs.rows(), source_probs.cols());
    if n == 0 || cs == 0 {
        return Err(MetricError::EmptyInput);
    }
    if labels.len() != n {
        return Err(MetricError::DimensionMismatch(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l < 0) {
        return Err(MetricError::DimensionMismatch(format!("label {bad} is negative")));
    }
    let ct = labels.iter().copied().max().unwrap_or(0) as usize + 1;

    let mut probs = Vec::with_capacity(n * cs);
    for i in 0..n {
        let row = source_probs.row(i);
        let sum: f64 = row.iter().map(|&p| f64::from(p)).sum();
        if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(MetricError::NotAProbability { row: i });
        }
        probs.extend(row.iter().map(|&p| f64::from(p) / sum));
    }

    // joint[y * cs + z] = (1/N) sum_i theta_iz [y_i = y]
    let mut joint = vec![0.0f64; ct * cs];
    for (i, &y) in labels.iter().enumerate() {
        let base = y as usize * cs;
        for z in 0..cs {
            joint[base + z] += probs[i * cs + z];
        }
    }
    joint.iter_mut().for_each(|v| *v /= n as f64);
    let mut marginal = vec![0.0f64; cs];
    for y in 0..ct {
        for z in 0..cs {
            marginal[z] += joint[y * cs + z];
        }
    }
    let conditional = |y: usize, z: usize| {
        if marginal[z] > 0.0 {
            joint[y * cs + z] / marginal[z]
        } else {
            0.0
        }
    };

    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let eep: f64 = (0..cs).map(|z| conditional(y as usize, z) * probs[i * cs + z]).sum();
            eep.ln()
        })
        .sum();
    Ok((total / n as f64).min(0.0))
}
