//! Rank correlation between ground-truth accuracies and predicted scores.

use std::cmp::Ordering;

use super::EvalError;

/// Aligned ground-truth and score vectors for one ranking problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingPair {
    ground: Vec<f64>,
    scores: Vec<f64>,
    model_ids: Vec<String>,
}

impl RankingPair {
    pub fn new(ground: Vec<f64>, scores: Vec<f64>, model_ids: Vec<String>) -> Result<Self, EvalError> {
        check(&ground, &scores)?;
        if model_ids.len() != ground.len() {
            return Err(EvalError::LengthMismatch { ground: ground.len(), scores: model_ids.len() });
        }
        Ok(Self { ground, scores, model_ids })
    }

    pub fn ground(&self) -> &[f64] {
        &self.ground
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn kendall_tau(&self) -> f64 {
        kendall_tau(&self.ground, &self.scores).expect("validated pair")
    }

    pub fn weighted_kendall_tau(&self) -> f64 {
        weighted_kendall_tau(&self.ground, &self.scores).expect("validated pair")
    }
}

fn check(ground: &[f64], scores: &[f64]) -> Result<(), EvalError> {
    if ground.len() != scores.len() {
        return Err(EvalError::LengthMismatch { ground: ground.len(), scores: scores.len() });
    }
    if ground.len() < 2 {
        return Err(EvalError::TooFewModels(ground.len()));
    }
    if ground.iter().chain(scores).any(|v| v.is_nan()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("NaN rejected")
}

/// Pairs tied within each run of equal values in an already sorted sequence.
fn tied_pairs<T: Copy>(sorted: &[T], eq: impl Fn(T, T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(w[0], w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` in place and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-a, `2/(M(M-1)) * sum_{i<j} sgn(G_i - G_j) sgn(T_i - T_j)`,
/// with `sgn(0) = 0`. Computed in `O(M log M)` with Knight's merge-sort
/// count of discordant pairs.
pub fn kendall_tau(ground: &[f64], scores: &[f64]) -> Result<f64, EvalError> {
    check(ground, scores)?;
    let m = ground.len() as u64;
    let mut order: Vec<usize> = (0..ground.len()).collect();
    order.sort_by(|&a, &b| cmp(ground[a], ground[b]).then(cmp(scores[a], scores[b])));

    let pairs = m * (m - 1) / 2;
    let tied_ground = tied_pairs(&order, |a, b| ground[a] == ground[b]);
    let tied_both = tied_pairs(&order, |a, b| ground[a] == ground[b] && scores[a] == scores[b]);
    let mut t: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let mut buf = Vec::with_capacity(t.len());
    let discordant = merge_count(&mut t, &mut buf);
    // `t` is now sorted by score
    let tied_scores = tied_pairs(&t, |a, b| a == b);

    let untied = pairs + tied_both - tied_ground - tied_scores;
    let numerator = untied as i64 - 2 * discordant as i64;
    Ok(numerator as f64 / pairs as f64)
}

/// Hyperbolic weight `1/(1+r)` of each model's ground-truth rank (0 = best).
/// Tied ground values share the mean weight of the positions they occupy.
pub fn rank_weights(ground: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..ground.len()).collect();
    order.sort_by(|&a, &b| cmp(ground[b], ground[a]));
    let mut weights = vec![0.0; ground.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && ground[order[end]] == ground[order[start]] {
            end += 1;
        }
        let mean = (start..end).map(|r| 1.0 / (1.0 + r as f64)).sum::<f64>() / (end - start) as f64;
        for &i in &order[start..end] {
            weights[i] = mean;
        }
        start = end;
    }
    weights
}

fn sgn(a: f64, b: f64) -> f64 {
    match cmp(a, b) {
        Ordering::Greater => 1.0,
        Ordering::Less => -1.0,
        Ordering::Equal => 0.0,
    }
}

/// Weighted tau with additive pair weights `w_i + w_j` from [`rank_weights`]:
/// `sum (w_i+w_j) sgn(dG) sgn(dT) / sum (w_i+w_j)`.
pub fn weighted_kendall_tau(ground: &[f64], scores: &[f64]) -> Result<f64, EvalError> {
    check(ground, scores)?;
    let w = rank_weights(ground);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..ground.len() {
        for j in i + 1..ground.len() {
            let pair = w[i] + w[j];
            num += pair * sgn(ground[i], ground[j]) * sgn(scores[i], scores[j]);
            den += pair;
        }
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::kendall_tau_pairs;

    #[test]
    fn identity_and_reversal() {
        let g = [0.1, 0.5, 0.3, 0.9];
        let r: Vec<f64> = g.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau(&g, &g).unwrap(), 1.0);
        assert_eq!(kendall_tau(&g, &r).unwrap(), -1.0);
        assert_eq!(weighted_kendall_tau(&g, &g).unwrap(), 1.0);
        assert_eq!(weighted_kendall_tau(&g, &r).unwrap(), -1.0);
    }

    #[test]
    fn one_adjacent_swap() {
        let v = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 3.0, 4.0]).unwrap();
        assert!((v - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_example() {
        let v = weighted_kendall_tau(&[0.9, 0.8, 0.7], &[0.8, 0.9, 0.7]).unwrap();
        let expected = (-1.5 + 4.0 / 3.0 + 5.0 / 6.0) / (1.5 + 4.0 / 3.0 + 5.0 / 6.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.181_818).abs() < 1e-6);
    }

    #[test]
    fn ties_contribute_zero() {
        let g = [1.0, 1.0, 2.0, 3.0, 3.0, 0.5];
        let t = [4.0, 4.0, 1.0, 2.0, 2.0, 2.0];
        assert_eq!(kendall_tau(&g, &t).unwrap(), kendall_tau_pairs(&g, &t));
        assert_eq!(kendall_tau(&[1.0, 1.0], &[2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn tied_ranks_share_weight() {
        let w = rank_weights(&[0.5, 0.9, 0.5, 0.1]);
        assert_eq!(w[1], 1.0);
        assert_eq!(w[0], (0.5 + 1.0 / 3.0) / 2.0);
        assert_eq!(w[2], w[0]);
        assert_eq!(w[3], 0.25);
    }

    #[test]
    fn errors() {
        assert!(matches!(kendall_tau(&[1.0], &[1.0]), Err(EvalError::TooFewModels(1))));
        assert!(matches!(weighted_kendall_tau(&[1.0, 2.0], &[1.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(kendall_tau(&[1.0, f64::NAN], &[1.0, 2.0]), Err(EvalError::NonFinite)));
    }

    #[test]
    fn swapping_top_costs_more_than_swapping_bottom() {
        for m in 4..10 {
            let g: Vec<f64> = (0..m).map(|i| (m - i) as f64).collect();
            let mut top = g.clone();
            top.swap(0, 1);
            let mut bottom = g.clone();
            bottom.swap(m - 2, m - 1);
            let t_top = weighted_kendall_tau(&g, &top).unwrap();
            let t_bottom = weighted_kendall_tau(&g, &bottom).unwrap();
            assert!(t_top < t_bottom, "m={m}: {t_top} vs {t_bottom}");
        }
    }

    #[test]
    fn ranking_pair_validates() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(RankingPair::new(vec![1.0, 2.0], vec![3.0, 4.0], ids.clone()).is_ok());
        assert!(RankingPair::new(vec![1.0, 2.0], vec![3.0, 4.0], ids[..1].to_vec()).is_err());
    }
}
