use rand::seq::SliceRandom;

use super::DriftError;
use crate::metrics::MatrixView;
use crate::rng::rng_from_seed;
use crate::tensor_io::{HeadWeights, Segment, Strategy, WeightSnapshot};

/// Argmax predictions of the source head on the target samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabels {
    values: Vec<i64>,
    classes: usize,
}

impl PseudoLabels {
    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn pseudo_labels(logits: MatrixView<'_>) -> Result<PseudoLabels, DriftError> {
    if logits.rows() == 0 || logits.cols() == 0 {
        return Err(DriftError::EmptyInput);
    }
    let values = (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best as i64
        })
        .collect();
    Ok(PseudoLabels { values, classes: logits.cols() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeStrategy {
    /// Linear classifier on frozen features.
    HeadOnly,
    /// Identity-initialised `D x D` linear adapter in front of the head.
    AdapterFull,
}

impl From<Strategy> for ProbeStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Head => ProbeStrategy::HeadOnly,
            Strategy::Full => ProbeStrategy::AdapterFull,
        }
    }
}

impl From<ProbeStrategy> for Strategy {
    fn from(s: ProbeStrategy) -> Self {
        match s {
            ProbeStrategy::HeadOnly => Strategy::Head,
            ProbeStrategy::AdapterFull => Strategy::Full,
        }
    }
}

/// Trainable probe. Flattening order is adapter, head weight, head bias,
/// each row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    pub strategy: ProbeStrategy,
    pub dim: usize,
    pub classes: usize,
    pub adapter: Option<Vec<f32>>,
    pub head_w: Vec<f32>,
    pub head_b: Vec<f32>,
}

impl ProbeParams {
    pub fn flatten(&self) -> WeightSnapshot {
        let mut segments = Vec::with_capacity(3);
        if let Some(a) = &self.adapter {
            segments.push(Segment { name: "adapter".into(), values: a.clone() });
        }
        segments.push(Segment { name: "head_w".into(), values: self.head_w.clone() });
        segments.push(Segment { name: "head_b".into(), values: self.head_b.clone() });
        WeightSnapshot::new(segments).expect("probe parameters are finite and non-empty")
    }

    fn check(&self) -> Result<(), DriftError> {
        let (d, c) = (self.dim, self.classes);
        let adapter_ok = match (self.strategy, &self.adapter) {
            (ProbeStrategy::HeadOnly, None) => true,
            (ProbeStrategy::AdapterFull, Some(a)) => a.len() == d * d,
            _ => false,
        };
        if !adapter_ok || self.head_w.len() != c * d || self.head_b.len() != c || d == 0 || c == 0 {
            return Err(DriftError::ShapeMismatch(format!(
                "probe does not match {:?} with D={d}, C={c}",
                self.strategy
            )));
        }
        Ok(())
    }
}

/// Builds the probe from the model's own classifier when available, zeros
/// otherwise. `AdapterFull` starts from the identity adapter.
pub fn init_probe(
    head: Option<&HeadWeights>,
    strategy: ProbeStrategy,
    dim: usize,
    classes: usize,
) -> Result<ProbeParams, DriftError> {
    if dim == 0 || classes == 0 {
        return Err(DriftError::ShapeMismatch(format!("D={dim}, C={classes} must be positive")));
    }
    let (head_w, head_b) = match head {
        Some(h) => {
            if h.weight.shape() != [classes, dim] {
                return Err(DriftError::ShapeMismatch(format!(
                    "head weight has shape {:?}, expected [{classes}, {dim}]",
                    h.weight.shape()
                )));
            }
            let w = h.weight.as_f32().expect("f32 head").to_vec();
            let b = match &h.bias {
                Some(b) if b.shape() == [classes] => b.as_f32().expect("f32 bias").to_vec(),
                Some(b) => {
                    return Err(DriftError::ShapeMismatch(format!(
                        "head bias has shape {:?}, expected [{classes}]",
                        b.shape()
                    )))
                }
                None => vec![0.0; classes],
            };
            (w, b)
        }
        None => (vec![0.0; classes * dim], vec![0.0; classes]),
    };
    let adapter = (strategy == ProbeStrategy::AdapterFull).then(|| {
        let mut eye = vec![0.0f32; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        eye
    });
    Ok(ProbeParams { strategy, dim, classes, adapter, head_w, head_b })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub strategy: ProbeStrategy,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 2, lr: 0.01, batch_size: 64, seed: 0, strategy: ProbeStrategy::HeadOnly, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DriftError> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr.is_nan() || self.lr < 0.0 || self.lr.is_infinite() {
            return Err(DriftError::InvalidConfig(format!(
                "need epochs >= 1, batch_size >= 1 and a finite lr >= 0; got {}, {}, {}",
                self.epochs, self.batch_size, self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuneOutcome {
    pub theta0: WeightSnapshot,
    pub theta1: WeightSnapshot,
    /// Mean cross-entropy over each epoch, measured before each minibatch step.
    pub loss_trace: Vec<f64>,
    pub probe: ProbeParams,
}

struct Working {
    adapter: Option<Vec<f64>>,
    w: Vec<f64>,
    b: Vec<f64>,
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| f64::from(x)).collect()
}

fn narrow(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Subtracts `lr * grad`, leaving entries untouched when the step is zero so
/// that signed zeros survive a zero learning rate bit-for-bit.
fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        let step = lr * g;
        if step != 0.0 {
            *p -= step;
        }
    }
}

/// Plain minibatch SGD on mean softmax cross-entropy against the
/// pseudo-labels. Computation is in f64; snapshots are stored as f32.
/// Shuffling is driven only by `cfg.seed`.
pub fn finetune_probe(
    features: MatrixView<'_>,
    pseudo: &PseudoLabels,
    probe0: &ProbeParams,
    cfg: &TrainConfig,
) -> Result<FineTuneOutcome, DriftError> {
    cfg.validate()?;
    probe0.check()?;
    let (n, d, c) = (features.rows(), probe0.dim, probe0.classes);
    if n == 0 {
        return Err(DriftError::EmptyInput);
    }
    if features.cols() != d || pseudo.len() != n || pseudo.classes() != c {
        return Err(DriftError::DimensionMismatch(format!(
            "features [{n} x {}], {} pseudo-labels over {} classes, probe D={d} C={c}",
            features.cols(),
            pseudo.len(),
            pseudo.classes()
        )));
    }
    if probe0.strategy != cfg.strategy {
        return Err(DriftError::InvalidConfig(format!(
            "probe is {:?} but config asks for {:?}",
            probe0.strategy, cfg.strategy
        )));
    }

    let xs = widen(features.data());
    let ys = pseudo.values();
    let mut params =
        Working { adapter: probe0.adapter.as_deref().map(widen), w: widen(&probe0.head_w), b: widen(&probe0.head_b) };
    let mut g_adapter = vec![0.0; if params.adapter.is_some() { d * d } else { 0 }];
    let mut g_w = vec![0.0; c * d];
    let mut g_b = vec![0.0; c];
    let mut h = vec![0.0; d];
    let mut z = vec![0.0; c];
    let mut dh = vec![0.0; d];
    let mut sample_loss = vec![0.0f64; n];

    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            g_adapter.iter_mut().for_each(|v| *v = 0.0);
            g_w.iter_mut().for_each(|v| *v = 0.0);
            g_b.iter_mut().for_each(|v| *v = 0.0);

            for &i in batch {
                let x = &xs[i * d..(i + 1) * d];
                match &params.adapter {
                    Some(a) => {
                        for r in 0..d {
                            h[r] = a[r * d..(r + 1) * d].iter().zip(x).map(|(p, q)| p * q).sum();
                        }
                    }
                    None => h.copy_from_slice(x),
                }
                for k in 0..c {
                    z[k] = params.b[k] + params.w[k * d..(k + 1) * d].iter().zip(&h).map(|(p, q)| p * q).sum::<f64>();
                }
                let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
                let lse = max + sum.ln();
                let y = ys[i] as usize;
                sample_loss[i] = lse - z[y];

                // dz = softmax(z) - onehot(y)
                for k in 0..c {
                    z[k] = (z[k] - lse).exp();
                }
                z[y] -= 1.0;
                for k in 0..c {
                    g_b[k] += z[k];
                    for (g, hv) in g_w[k * d..(k + 1) * d].iter_mut().zip(&h) {
                        *g += z[k] * hv;
                    }
                }
                if params.adapter.is_some() {
                    for r in 0..d {
                        dh[r] = (0..c).map(|k| params.w[k * d + r] * z[k]).sum();
                    }
                    for r in 0..d {
                        for (g, xv) in g_adapter[r * d..(r + 1) * d].iter_mut().zip(x) {
                            *g += dh[r] * xv;
                        }
                    }
                }
            }

            let scale = 1.0 / batch.len() as f64;
            g_w.iter_mut().for_each(|v| *v *= scale);
            g_b.iter_mut().for_each(|v| *v *= scale);
            g_adapter.iter_mut().for_each(|v| *v *= scale);
            sgd_step(&mut params.w, &g_w, cfg.lr);
            sgd_step(&mut params.b, &g_b, cfg.lr);
            if let Some(a) = params.adapter.as_mut() {
                sgd_step(a, &g_adapter, cfg.lr);
            }
            let finite = params.w.iter().chain(&params.b).all(|v| v.is_finite())
                && params.adapter.iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Err(DriftError::NonFiniteLoss { epoch });
            }
        }
        let epoch_loss = sample_loss.iter().sum::<f64>() / n as f64;
        if !epoch_loss.is_finite() {
            return Err(DriftError::NonFiniteLoss { epoch });
        }
        loss_trace.push(epoch_loss);
    }

    let probe = ProbeParams {
        strategy: probe0.strategy,
        dim: d,
        classes: c,
        adapter: params.adapter.as_deref().map(narrow),
        head_w: narrow(&params.w),
        head_b: narrow(&params.b),
    };
    if probe.head_w.iter().chain(&probe.head_b).chain(probe.adapter.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(DriftError::NonFiniteLoss { epoch: cfg.epochs - 1 });
    }
    Ok(FineTuneOutcome { theta0: probe0.flatten(), theta1: probe.flatten(), loss_trace, probe })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_io::TensorBlob;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn argmax_examples() {
        let logits = [0.1f32, 0.9, 2.0, -1.0];
        let p = pseudo_labels(MatrixView::new(&logits, 2, 2).unwrap()).unwrap();
        assert_eq!(p.values(), &[1, 0]);
        let tie = [3.0f32, 3.0, 1.0];
        assert_eq!(pseudo_labels(MatrixView::new(&tie, 1, 3).unwrap()).unwrap().values(), &[0]);
        assert_eq!(pseudo_labels(MatrixView::new(&[], 0, 3).unwrap()), Err(DriftError::EmptyInput));
    }

    #[test]
    fn argmax_matches_row_scan() {
        let mut rng = rng_from_seed(3);
        let (n, c) = (1000, 7);
        let logits: Vec<f32> = (0..n * c).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
        let p = pseudo_labels(MatrixView::new(&logits, n, c).unwrap()).unwrap();
        for i in 0..n {
            let row = &logits[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let first = row.iter().position(|&v| v == max).unwrap() as i64;
            assert_eq!(p.values()[i], first);
        }
    }

    fn head(c: usize, d: usize) -> HeadWeights {
        let w: Vec<f32> = (0..c * d).map(|i| i as f32 * 0.5 - 1.0).collect();
        let b: Vec<f32> = (0..c).map(|i| i as f32).collect();
        HeadWeights::new(TensorBlob::from_f32(vec![c, d], w).unwrap(), Some(TensorBlob::from_f32(vec![c], b).unwrap()))
            .unwrap()
    }

    #[test]
    fn init_copies_supplied_head() {
        let h = head(5, 8);
        let p = init_probe(Some(&h), ProbeStrategy::HeadOnly, 8, 5).unwrap();
        assert_eq!(p.head_w, h.weight.as_f32().unwrap());
        assert_eq!(p.head_b, h.bias.as_ref().unwrap().as_f32().unwrap());
        assert!(p.adapter.is_none());
    }

    #[test]
    fn init_adapter_is_identity() {
        let p = init_probe(None, ProbeStrategy::AdapterFull, 3, 2).unwrap();
        assert_eq!(p.adapter.unwrap(), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.head_w, vec![0.0; 6]);
    }

    #[test]
    fn init_rejects_wrong_head_shape() {
        let h = head(5, 8);
        assert!(matches!(init_probe(Some(&h), ProbeStrategy::HeadOnly, 7, 5), Err(DriftError::ShapeMismatch(_))));
    }

    #[test]
    fn flatten_order() {
        let p = init_probe(Some(&head(2, 2)), ProbeStrategy::AdapterFull, 2, 2).unwrap();
        let snap = p.flatten();
        let names: Vec<&str> = snap.segments().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["adapter", "head_w", "head_b"]);
        assert_eq!(snap.flat(), vec![1.0, 0.0, 0.0, 1.0, -1.0, -0.5, 0.0, 0.5, 0.0, 1.0]);
    }

    fn blobs(seed: u64, n: usize) -> (Vec<f32>, Vec<i64>) {
        let mut rng = rng_from_seed(seed);
        let mut x = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = (i % 2) as i64;
            let centre = if c == 0 { -2.0 } else { 2.0 };
            x.push(centre + 0.5 * rng.sample::<f32, _>(StandardNormal));
            x.push(0.5 * rng.sample::<f32, _>(StandardNormal));
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let (x, _) = blobs(1, 50);
        let logits: Vec<f32> = x.iter().map(|v| -v).collect();
        let pseudo = pseudo_labels(MatrixView::new(&logits, 50, 2).unwrap()).unwrap();
        for strategy in [ProbeStrategy::HeadOnly, ProbeStrategy::AdapterFull] {
            let mut h = head(2, 2);
            // signed zero must survive
            h.weight = TensorBlob::from_f32(vec![2, 2], vec![-0.0, 1.0, 0.5, -0.0]).unwrap();
            let p0 = init_probe(Some(&h), strategy, 2, 2).unwrap();
            let cfg = TrainConfig { lr: 0.0, strategy, epochs: 3, batch_size: 7, ..Default::default() };
            let out = finetune_probe(MatrixView::new(&x, 50, 2).unwrap(), &pseudo, &p0, &cfg).unwrap();
            assert!(out.theta1.bit_eq(&out.theta0));
            assert!(out.loss_trace.windows(2).all(|w| w[0].to_bits() == w[1].to_bits()));
        }
    }

    #[test]
    fn zero_features_only_move_bias() {
        let x = vec![0.0f32; 40];
        let pseudo = PseudoLabels { values: (0..20).map(|i| (i % 3 == 0) as i64).collect(), classes: 2 };
        let p0 = init_probe(None, ProbeStrategy::HeadOnly, 2, 2).unwrap();
        let cfg = TrainConfig { lr: 0.5, ..Default::default() };
        let out = finetune_probe(MatrixView::new(&x, 20, 2).unwrap(), &pseudo, &p0, &cfg).unwrap();
        assert!(out.probe.head_w.iter().all(|v| v.to_bits() == 0));
        assert!(out.probe.head_b.iter().any(|&v| v != 0.0));
    }

    /// Full-batch gradient descent written independently: with enough
    /// steps on separable data it drives the loss down, and the minibatch
    /// trainer must agree in direction.
    fn full_batch_loss_after(x: &[f32], y: &[i64], steps: usize, lr: f64) -> Vec<f64> {
        let n = y.len();
        let (mut w, mut b) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        let mut losses = Vec::new();
        for _ in 0..=steps {
            let mut gw = [[0.0f64; 2]; 2];
            let mut gb = [0.0f64; 2];
            let mut loss = 0.0;
            for i in 0..n {
                let xi = [x[2 * i] as f64, x[2 * i + 1] as f64];
                let z: Vec<f64> = (0..2).map(|k| w[k][0] * xi[0] + w[k][1] * xi[1] + b[k]).collect();
                let m = z[0].max(z[1]);
                let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
                loss += lse - z[y[i] as usize];
                for k in 0..2 {
                    let dz = (z[k] - lse).exp() - if k == y[i] as usize { 1.0 } else { 0.0 };
                    gw[k][0] += dz * xi[0] / n as f64;
                    gw[k][1] += dz * xi[1] / n as f64;
                    gb[k] += dz / n as f64;
                }
            }
            losses.push(loss / n as f64);
            for k in 0..2 {
                w[k][0] -= lr * gw[k][0];
                w[k][1] -= lr * gw[k][1];
                b[k] -= lr * gb[k];
            }
        }
        losses
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let (x, y) = blobs(11, 200);
        let oracle = full_batch_loss_after(&x, &y, 14, 0.1);
        assert!(oracle.last().unwrap() < &oracle[0]);

        let pseudo = PseudoLabels { values: y.clone(), classes: 2 };
        let p0 = init_probe(None, ProbeStrategy::HeadOnly, 2, 2).unwrap();
        let cfg = TrainConfig { lr: 0.1, batch_size: 32, seed: 11, ..Default::default() };
        let out = finetune_probe(MatrixView::new(&x, 200, 2).unwrap(), &pseudo, &p0, &cfg).unwrap();
        assert_eq!(out.loss_trace.len(), 2);
        assert!(out.loss_trace[1] < out.loss_trace[0], "{:?}", out.loss_trace);
        // first epoch starts from the same zero head as the oracle
        assert!((out.loss_trace[0] - 2f64.ln()).abs() < 0.7);
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let (x, y) = blobs(2, 100);
        let pseudo = PseudoLabels { values: y, classes: 2 };
        let p0 = init_probe(None, ProbeStrategy::AdapterFull, 2, 2).unwrap();
        let view = MatrixView::new(&x, 100, 2).unwrap();
        let cfg = TrainConfig {
            strategy: ProbeStrategy::AdapterFull,
            batch_size: 16,
            lr: 0.2,
            seed: 5,
            ..Default::default()
        };
        let a = finetune_probe(view, &pseudo, &p0, &cfg).unwrap();
        let b = finetune_probe(view, &pseudo, &p0, &cfg).unwrap();
        assert!(a.theta1.bit_eq(&b.theta1));
        let c = finetune_probe(view, &pseudo, &p0, &TrainConfig { seed: 6, ..cfg.clone() }).unwrap();
        assert!(!a.theta1.bit_eq(&c.theta1));
        // adapter moved away from identity
        assert_ne!(a.probe.adapter.as_ref().unwrap(), p0.adapter.as_ref().unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let x = vec![1e30f32; 40];
        let pseudo = PseudoLabels { values: vec![0; 20], classes: 2 };
        let p0 = init_probe(None, ProbeStrategy::HeadOnly, 2, 2).unwrap();
        let cfg = TrainConfig { lr: 1e10, ..Default::default() };
        let err = finetune_probe(MatrixView::new(&x, 20, 2).unwrap(), &pseudo, &p0, &cfg).unwrap_err();
        assert!(matches!(err, DriftError::NonFiniteLoss { .. }));
    }

    #[test]
    fn config_and_dimension_checks() {
        let x = vec![0.0f32; 6];
        let pseudo = PseudoLabels { values: vec![0, 1, 0], classes: 2 };
        let p0 = init_probe(None, ProbeStrategy::HeadOnly, 2, 2).unwrap();
        let view = MatrixView::new(&x, 3, 2).unwrap();
        for bad in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { lr: -1.0, ..Default::default() },
            TrainConfig { strategy: ProbeStrategy::AdapterFull, ..Default::default() },
        ] {
            assert!(matches!(finetune_probe(view, &pseudo, &p0, &bad), Err(DriftError::InvalidConfig(_))));
        }
        let short = PseudoLabels { values: vec![0, 1], classes: 2 };
        assert!(matches!(
            finetune_probe(view, &short, &p0, &TrainConfig::default()),
            Err(DriftError::DimensionMismatch(_))
        ));
    }
}
