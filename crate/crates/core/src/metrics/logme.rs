//! Log maximum evidence of one-vs-rest targets under Bayesian linear
//! regression on the extracted features.
//!
//! For each class the evidence `p(y | F, alpha, beta)` of the prior precision
//! `alpha` and noise precision `beta` is maximized by the MacKay fixed-point
//! iteration. All linear algebra is done in the eigenbasis of `F^T F`, which
//! is computed once and shared by every class.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{distinct_labels, MatrixView, MetricError};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMeConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogMeConfig {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6 }
    }
}

struct Posterior {
    gamma: f64,
    m_norm2: f64,
    residual2: f64,
}

struct Problem<'a> {
    features: &'a DMatrix<f64>,
    eigvecs: &'a DMatrix<f64>,
    eigvals: &'a [f64],
    /// `V^T F^T y`
    projected: DVector<f64>,
    target: DVector<f64>,
}

impl Problem<'_> {
    fn posterior(&self, alpha: f64, beta: f64) -> Posterior {
        let mut gamma = 0.0;
        let mut m_eig = DVector::zeros(self.eigvals.len());
        for (j, &s) in self.eigvals.iter().enumerate() {
            let denom = alpha + beta * s;
            if denom > 0.0 {
                m_eig[j] = beta * self.projected[j] / denom;
                gamma += beta * s / denom;
            }
        }
        let m = self.eigvecs * &m_eig;
        let residual2 = (self.features * &m - &self.target).norm_squared();
        Posterior { gamma, m_norm2: m_eig.norm_squared(), residual2 }
    }

    /// Log evidence for the given precisions. `D/2 log(alpha) - 1/2 log det(alpha I + beta F^T F)`
    /// is folded into `-1/2 sum log(1 + beta s_j / alpha)` so that zero
    /// eigenvalues contribute exactly nothing even when `alpha` underflows.
    fn log_evidence(&self, alpha: f64, beta: f64) -> f64 {
        let n = self.target.len() as f64;
        let p = self.posterior(alpha, beta);
        let log_det_ratio: f64 = self.eigvals.iter().filter(|&&s| s > 0.0).map(|&s| (beta * s / alpha).ln_1p()).sum();
        0.5 * n * beta.ln()
            - 0.5 * beta * p.residual2
            - 0.5 * alpha * p.m_norm2
            - 0.5 * log_det_ratio
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// The evidence can have more than one mode in `(alpha, beta)`, and the
    /// iteration from `(1, 1)` does not always reach the highest. Extra runs
    /// start from every local maximum of a half-decade scan over
    /// `[1e-6, 1e6]^2`; the converged point with the largest evidence wins.
    fn maximize(&self, cfg: LogMeConfig) -> (f64, f64) {
        const K: usize = 25;
        let grid: Vec<f64> = (0..K).map(|i| 10f64.powf(-6.0 + 0.5 * i as f64)).collect();
        let scan: Vec<f64> = (0..K * K)
            .map(|k| self.log_evidence(grid[k / K], grid[k % K]))
            .map(|e| if e.is_finite() { e } else { f64::NEG_INFINITY })
            .collect();
        let mut starts = vec![(1.0, 1.0)];
        for i in 0..K {
            for j in 0..K {
                let e = scan[i * K + j];
                let peak = e.is_finite()
                    && (i.saturating_sub(1)..(i + 2).min(K))
                        .flat_map(|a| (j.saturating_sub(1)..(j + 2).min(K)).map(move |b| (a, b)))
                        .all(|(a, b)| scan[a * K + b] <= e);
                if peak {
                    starts.push((grid[i], grid[j]));
                }
            }
        }
        let mut best: Option<(f64, f64, f64)> = None;
        for (a0, b0) in starts {
            let (a, b) = self.fixed_point(a0, b0, cfg);
            let e = self.log_evidence(a, b);
            if best.is_none_or(|(be, _, _)| e > be || be.is_nan()) {
                best = Some((e, a, b));
            }
        }
        best.map_or((1.0, 1.0), |(_, a, b)| (a, b))
    }

    fn fixed_point(&self, mut alpha: f64, mut beta: f64, cfg: LogMeConfig) -> (f64, f64) {
        let n = self.target.len() as f64;
        for _ in 0..cfg.max_iter {
            let p = self.posterior(alpha, beta);
            let next_alpha = p.gamma / (p.m_norm2 + EPS);
            let next_beta = (n - p.gamma) / (p.residual2 + EPS);
            let done = (next_alpha - alpha).abs() / alpha < cfg.tol && (next_beta - beta).abs() / beta < cfg.tol;
            alpha = next_alpha;
            beta = next_beta;
            if done || alpha <= 0.0 {
                break;
            }
        }
        (alpha, beta)
    }
}

/// Mean over classes of the per-sample maximized log evidence of the
/// one-vs-rest binary targets.
pub fn logme(features: MatrixView<'_>, labels: &[i64], cfg: LogMeConfig) -> Result<f64, MetricError> {
    let (n, d) = (features.rows(), features.cols());
    if labels.len() != n {
        return Err(MetricError::DimensionMismatch(format!("{} labels for {n} feature rows", labels.len())));
    }
    if n < 2 || d == 0 {
        return Err(MetricError::DimensionMismatch(format!("need at least 2 samples and 1 feature, got [{n} x {d}]")));
    }
    if cfg.max_iter == 0 || cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(MetricError::InvalidParameter(format!(
            "max_iter must be >= 1 and tol > 0, got {} and {}",
            cfg.max_iter, cfg.tol
        )));
    }
    let classes = distinct_labels(labels);
    if classes.len() < 2 {
        return Err(MetricError::DegenerateLabels(format!("need at least 2 classes, found {}", classes.len())));
    }

    let f = features.to_dmatrix();
    let gram = f.transpose() * &f;
    let eig = SymmetricEigen::new(gram);
    let eigvals: Vec<f64> = eig.eigenvalues.iter().map(|&s| s.max(0.0)).collect();
    let vt_ft = eig.eigenvectors.transpose() * f.transpose();

    let mut total = 0.0;
    for &c in &classes {
        let target = DVector::from_iterator(n, labels.iter().map(|&l| if l == c { 1.0 } else { 0.0 }));
        let problem = Problem {
            features: &f,
            eigvecs: &eig.eigenvectors,
            eigvals: &eigvals,
            projected: &vt_ft * &target,
            target,
        };
        let (alpha, beta) = problem.maximize(cfg);
        total += problem.log_evidence(alpha, beta) / n as f64;
    }
    let score = total / classes.len() as f64;
    if !score.is_finite() {
        return Err(MetricError::NonFiniteScore(format!("logme evaluated to {score}")));
    }
    Ok(score)
}
