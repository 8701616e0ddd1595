//! Stacked temporal convolutions with batch norm and ReLU, then a linear head
//! over the flattened last activation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::activation::{relu_backward_inplace, relu_inplace};
use crate::nn::batchnorm::{BatchNorm, BatchNormCache, BatchStats, Mode};
use crate::nn::conv1d::{Conv1d, Conv1dCache};
use crate::nn::linear::Linear;
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;
use crate::encoders::FeatureVector;
use crate::tcn::window::{build_windows, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct TcnConfig {
    pub input_width: usize,
    pub window_len: usize,
    pub kernel: usize,
    /// Output channels `F_1 ..= F_L` of the conv layers.
    pub widths: Vec<usize>,
}

impl TcnConfig {
    pub fn desk(input_width: usize, window_len: usize) -> Self {
        Self {
            input_width,
            window_len,
            kernel: 3,
            widths: vec![96, 64, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnModel {
    pub window_len: usize,
    pub convs: Vec<Conv1d>,
    pub norms: Vec<BatchNorm>,
    pub head: Linear,
}

#[derive(Debug, Clone)]
pub struct TcnCache {
    batch: usize,
    convs: Vec<Conv1dCache>,
    norms: Vec<BatchNormCache>,
    /// Post-ReLU output of every layer.
    activations: Vec<Tensor>,
}

impl TcnModel {
    pub fn new<R: Rng + ?Sized>(cfg: &TcnConfig, rng: &mut R) -> Result<Self> {
        if cfg.widths.is_empty() {
            return Err(Error::Config("temporal block needs at least one conv layer".into()));
        }
        if cfg.window_len == 0 || cfg.window_len % 2 == 0 {
            return Err(Error::Config(format!("window length {} must be odd", cfg.window_len)));
        }
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        let mut c = cfg.input_width;
        for &w in &cfg.widths {
            convs.push(Conv1d::init(c, w, cfg.kernel, rng)?);
            norms.push(BatchNorm::new(w));
            c = w;
        }
        Ok(Self {
            window_len: cfg.window_len,
            convs,
            norms,
            head: Linear::init(c * cfg.window_len, 1, rng)?,
        })
    }

    pub fn input_width(&self) -> usize {
        self.convs[0].in_channels
    }

    pub fn config(&self) -> TcnConfig {
        TcnConfig {
            input_width: self.input_width(),
            window_len: self.window_len,
            kernel: self.convs[0].kernel,
            widths: self.convs.iter().map(|c| c.out_channels).collect(),
        }
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        match x.shape() {
            &[b, t, c] if t == self.window_len && c == self.input_width() => Ok(b),
            s => Err(Error::Shape(format!(
                "temporal block expects [batch, {}, {}], got {s:?}",
                self.window_len,
                self.input_width()
            ))),
        }
    }

    /// Train-mode forward on `[batch, window, features]`. Running statistics are
    /// not touched; the batch statistics come back for [`TcnModel::update_running`].
    pub fn forward_train(&self, x: &Tensor) -> Result<(Vec<f64>, TcnCache, Vec<BatchStats>)> {
        self.forward_recorded(x, Mode::Train)
    }

    /// Forward pass that records a cache for [`TcnModel::backward`]. In eval mode
    /// batch norm uses running statistics and no batch statistics are returned.
    pub fn forward_recorded(&self, x: &Tensor, mode: Mode) -> Result<(Vec<f64>, TcnCache, Vec<BatchStats>)> {
        let batch = self.check(x)?;
        let mut convs = Vec::with_capacity(self.convs.len());
        let mut norms = Vec::with_capacity(self.convs.len());
        let mut stats = Vec::with_capacity(self.convs.len());
        let mut acts: Vec<Tensor> = Vec::with_capacity(self.convs.len());
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            let input = acts.last().unwrap_or(x);
            let (y, cc) = conv.forward(input)?;
            let (mut y, nc) = match mode {
                Mode::Train => {
                    let (y, nc, st) = bn.forward_batch(&y)?;
                    stats.push(st);
                    (y, nc)
                }
                Mode::Eval => bn.forward_eval_cached(&y)?,
            };
            relu_inplace(y.data_mut());
            convs.push(cc);
            norms.push(nc);
            acts.push(y);
        }
        let preds = self.head.forward_rows(acts.last().expect("non-empty").data())?;
        Ok((
            preds,
            TcnCache {
                batch,
                convs,
                norms,
                activations: acts,
            },
            stats,
        ))
    }

    pub fn update_running(&mut self, stats: &[BatchStats]) {
        for (bn, s) in self.norms.iter_mut().zip(stats) {
            bn.update_running(s);
        }
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut h = x.clone();
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            let (y, _) = conv.forward(&h)?;
            h = bn.forward_eval(&y)?;
            relu_inplace(h.data_mut());
        }
        self.head.forward_rows(h.data())
    }

    /// Accumulates parameter gradients and returns `d loss / d input`.
    pub fn backward(&self, cache: &TcnCache, dpred: &[f64], grad: &mut TcnModel) -> Tensor {
        assert_eq!(dpred.len(), cache.batch, "one gradient per prediction");
        let last = cache.activations.last().expect("non-empty");
        let d = self
            .head
            .backward_rows(last.data(), dpred, &mut grad.head, true)
            .expect("input gradient requested");
        let mut d = Tensor::from_parts(last.shape().to_vec(), d);
        for i in (0..self.convs.len()).rev() {
            relu_backward_inplace(cache.activations[i].data(), d.data_mut());
            let dn = self.norms[i].backward(&cache.norms[i], &d, &mut grad.norms[i]);
            d = self.convs[i].backward(&cache.convs[i], &dn, &mut grad.convs[i]);
        }
        d
    }
}

impl Params for TcnModel {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, (c, n)) in self.convs.iter().zip(&self.norms).enumerate() {
            c.visit(&mut |name, p| f(&format!("conv{i}.{name}"), p));
            n.visit(&mut |name, p| f(&format!("bn{i}.{name}"), p));
        }
        self.head.visit(&mut |name, p| f(&format!("head.{name}"), p));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, (c, n)) in self.convs.iter_mut().zip(self.norms.iter_mut()).enumerate() {
            c.visit_mut(&mut |name, p| f(&format!("conv{i}.{name}"), p));
            n.visit_mut(&mut |name, p| f(&format!("bn{i}.{name}"), p));
        }
        self.head.visit_mut(&mut |name, p| f(&format!("head.{name}"), p));
    }

    fn visit_buffers(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, n) in self.norms.iter().enumerate() {
            n.visit_buffers(&mut |name, p| f(&format!("bn{i}.{name}"), p));
        }
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, n) in self.norms.iter_mut().enumerate() {
            n.visit_buffers_mut(&mut |name, p| f(&format!("bn{i}.{name}"), p));
        }
    }
}

/// Stack windows into a `[batch, window, width]` tensor.
pub fn stack_windows(batch: &[Window]) -> Result<Tensor> {
    let first = batch.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
    let (t, w) = (first.len(), first.width);
    if let Some(i) = batch.iter().position(|b| b.width != w || b.len() != t) {
        return Err(Error::Shape(format!("window {i} differs in shape from window 0")));
    }
    Ok(Tensor::from_parts(
        vec![batch.len(), t, w],
        batch.iter().flat_map(|b| b.features.iter().copied()).collect(),
    ))
}

/// Predictions for a batch of windows. Train mode uses batch statistics and
/// updates the running statistics.
pub fn tcn_forward(batch: &[Window], model: &mut TcnModel, mode: Mode) -> Result<Vec<f64>> {
    let x = stack_windows(batch)?;
    match mode {
        Mode::Eval => model.forward_eval(&x),
        Mode::Train => {
            let (preds, _, stats) = model.forward_train(&x)?;
            model.update_running(&stats);
            Ok(preds)
        }
    }
}

/// Sliding-window predictions `(t, prediction)` in eval mode, time-ordered.
pub fn predict(model: &TcnModel, features: &[FeatureVector], n: usize) -> Result<Vec<(f64, f64)>> {
    if 2 * n + 1 != model.window_len {
        return Err(Error::Shape(format!(
            "half width {n} does not match a model window of {}",
            model.window_len
        )));
    }
    let windows = build_windows(features, &vec![0.0; features.len()], n)?;
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(256) {
        let preds = model.forward_eval(&stack_windows(chunk)?)?;
        out.extend(chunk.iter().zip(preds).map(|(w, p)| (features[w.center].t, p)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn windows(count: usize, t: usize, w: usize, seed: usize) -> Vec<Window> {
        (0..count)
            .map(|k| Window {
                features: (0..t * w).map(|i| ((i * 7 + k * 13 + seed) as f64 * 0.37).sin()).collect(),
                width: w,
                label: k as f64,
                center: k,
            })
            .collect()
    }

    #[test]
    fn zero_network_predicts_head_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = TcnModel::new(
            &TcnConfig {
                input_width: 4,
                window_len: 5,
                kernel: 3,
                widths: vec![3, 2],
            },
            &mut rng,
        )
        .unwrap();
        m.visit_mut(&mut |_, p| p.fill(0.0));
        for bn in &mut m.norms {
            bn.gamma.fill(1.0);
        }
        m.head.bias[0] = -3.2;
        let preds = tcn_forward(&windows(6, 5, 4, 0), &mut m, Mode::Eval).unwrap();
        assert_eq!(preds, vec![-3.2; 6]);
    }

    #[test]
    fn single_layer_hand_computation() {
        // L = 1, d = 1, one channel, three frames
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = TcnModel::new(
            &TcnConfig {
                input_width: 1,
                window_len: 3,
                kernel: 1,
                widths: vec![1],
            },
            &mut rng,
        )
        .unwrap();
        m.convs[0].weight = vec![2.0];
        m.convs[0].bias = vec![-1.0];
        m.norms[0].running_mean = vec![0.5];
        m.norms[0].running_var = vec![4.0 - 1e-5];
        m.norms[0].gamma = vec![3.0];
        m.norms[0].beta = vec![0.25];
        m.head.weight = vec![1.0, -1.0, 0.5];
        m.head.bias = vec![0.1];
        let w = Window {
            features: vec![1.0, 0.0, 3.0],
            width: 1,
            label: 0.0,
            center: 1,
        };
        // conv: (1, -1, 5); bn: (x - 0.5) / 2 * 3 + 0.25 = (1.0, -2.0, 7.0); relu: (1, 0, 7)
        // head: 1 - 0 + 3.5 + 0.1
        let pred = tcn_forward(&[w], &mut m, Mode::Eval).unwrap();
        assert!((pred[0] - 4.6).abs() < 1e-12);
    }

    #[test]
    fn eval_batch_order_permutes_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = TcnModel::new(&TcnConfig::desk(6, 5), &mut rng).unwrap();
        let ws = windows(5, 5, 6, 3);
        let a = tcn_forward(&ws, &mut m, Mode::Eval).unwrap();
        let rev: Vec<Window> = ws.iter().rev().cloned().collect();
        let mut b = tcn_forward(&rev, &mut m, Mode::Eval).unwrap();
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = TcnModel::new(&TcnConfig::desk(6, 5), &mut rng).unwrap();
        assert!(tcn_forward(&windows(2, 3, 6, 0), &mut m, Mode::Eval).is_err());
        assert!(tcn_forward(&windows(2, 5, 7, 0), &mut m, Mode::Eval).is_err());
        assert!(tcn_forward(&windows(1, 5, 6, 0), &mut m, Mode::Train).is_err());
    }

    #[test]
    fn train_mode_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for draw in 0..10 {
            let mut m = TcnModel::new(
                &TcnConfig {
                    input_width: 3,
                    window_len: 5,
                    kernel: 3,
                    widths: vec![4, 2],
                },
                &mut rng,
            )
            .unwrap();
            for bn in &mut m.norms {
                bn.beta.iter_mut().enumerate().for_each(|(i, b)| *b = 0.3 - 0.2 * i as f64);
            }
            let x = stack_windows(&windows(4, 5, 3, draw)).unwrap();
            let target = [0.5, -1.0, 2.0, 0.0];
            let loss = |m: &TcnModel| {
                let (p, _, _) = m.forward_train(&x).unwrap();
                crate::nn::loss::mse_loss(&p, &target).unwrap()
            };
            let (p, cache, _) = m.forward_train(&x).unwrap();
            let dp = crate::nn::loss::mse_grad(&p, &target).unwrap();
            let mut g = m.zeros_like();
            m.backward(&cache, &dp, &mut g);
            // closed form for the head bias
            assert!((g.head.bias[0] - dp.iter().sum::<f64>()).abs() < 1e-12);
            let rep = check_gradients(&m, &g, 1e-5, loss);
            assert!(rep.max_rel_error < 1e-4, "draw {draw}: {rep:?}");
        }
    }

    fn feature_sequence(len: usize, w: usize) -> Vec<FeatureVector> {
        (0..len)
            .map(|i| FeatureVector {
                t: i as f64 / 30.0,
                values: (0..w).map(|j| ((i * w + j) as f64 * 0.21).sin()).collect(),
                rgb_width: w,
                point_width: 0,
            })
            .collect()
    }

    #[test]
    fn predict_counts_and_matches_windowwise_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = TcnModel::new(&TcnConfig::desk(4, 7), &mut rng).unwrap();
        let seq = feature_sequence(40, 4);
        let out = predict(&m, &seq, 3).unwrap();
        assert_eq!(out.len(), 40 - 6);
        let windows = build_windows(&seq, &[0.0; 40], 3).unwrap();
        for (w, (t, p)) in windows.iter().zip(&out) {
            assert_eq!(*t, seq[w.center].t);
            let single = tcn_forward(std::slice::from_ref(w), &mut m, Mode::Eval).unwrap();
            assert_eq!(single[0], *p);
        }
        assert!(out.windows(2).all(|p| p[0].0 < p[1].0));
        assert!(predict(&m, &seq, 2).is_err());
        assert!(predict(&m, &seq[..6], 3).is_err());
    }
}
