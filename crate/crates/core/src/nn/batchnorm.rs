//! Per-channel batch normalization over channels-last activations.

use crate::error::{Error, Result};
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Statistics are taken over every axis except the last (channel) one, so a
/// `[batch, time, channels]` input normalizes across batch and time.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub rows: usize,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    /// Statistics were the running ones, so they do not depend on the input.
    fixed: bool,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
        }
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        let shape = x.shape();
        if shape.len() < 2 || shape[shape.len() - 1] != self.channels {
            return Err(Error::Shape(format!(
                "batch norm over {} channels got shape {shape:?}",
                self.channels
            )));
        }
        Ok(x.len() / self.channels)
    }

    /// Train-mode pass: batch statistics, running-stat update, cache for backward.
    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        let (y, cache, stats) = self.forward_batch(x)?;
        self.update_running(&stats);
        Ok((y, cache))
    }

    /// Train-mode output without touching running statistics.
    pub fn forward_train_frozen(&self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        self.forward_batch(x).map(|(y, c, _)| (y, c))
    }

    /// Normalize with batch statistics; the statistics are returned for
    /// [`BatchNorm::update_running`].
    pub fn forward_batch(&self, x: &Tensor) -> Result<(Tensor, BatchNormCache, BatchStats)> {
        let rows = self.check(x)?;
        if x.dim(0) < 2 {
            return Err(Error::Validation("train-mode batch norm needs a batch of at least 2".into()));
        }
        let c = self.channels;
        let xs = x.data();
        let mut mean = vec![0.0; c];
        for r in 0..rows {
            for (m, v) in mean.iter_mut().zip(&xs[r * c..(r + 1) * c]) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0; c];
        for r in 0..rows {
            for ((s, v), m) in var.iter_mut().zip(&xs[r * c..(r + 1) * c]).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= rows as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();

        let mut xhat = vec![0.0; xs.len()];
        let mut y = vec![0.0; xs.len()];
        for r in 0..rows {
            for j in 0..c {
                let i = r * c + j;
                xhat[i] = (xs[i] - mean[j]) * inv_std[j];
                y[i] = self.gamma[j] * xhat[i] + self.beta[j];
            }
        }
        Ok((
            Tensor::from_parts(x.shape().to_vec(), y),
            BatchNormCache {
                xhat,
                inv_std,
                fixed: false,
            },
            BatchStats { mean, var, rows },
        ))
    }

    /// Exponential moving average toward the batch mean and unbiased variance.
    pub fn update_running(&mut self, stats: &BatchStats) {
        let unbias = stats.rows as f64 / (stats.rows as f64 - 1.0);
        for j in 0..self.channels {
            self.running_mean[j] = (1.0 - self.momentum) * self.running_mean[j] + self.momentum * stats.mean[j];
            self.running_var[j] =
                (1.0 - self.momentum) * self.running_var[j] + self.momentum * stats.var[j] * unbias;
        }
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let rows = self.check(x)?;
        let c = self.channels;
        let inv_std: Vec<f64> = self.running_var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut y = x.data().to_vec();
        for r in 0..rows {
            for j in 0..c {
                let i = r * c + j;
                y[i] = self.gamma[j] * ((y[i] - self.running_mean[j]) * inv_std[j]) + self.beta[j];
            }
        }
        Ok(Tensor::from_parts(x.shape().to_vec(), y))
    }

    /// Running-statistics pass that records a cache, for differentiating
    /// inference-mode outputs.
    pub fn forward_eval_cached(&self, x: &Tensor) -> Result<(Tensor, BatchNormCache)> {
        let rows = self.check(x)?;
        let c = self.channels;
        let inv_std: Vec<f64> = self.running_var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let xs = x.data();
        let mut xhat = vec![0.0; xs.len()];
        let mut y = vec![0.0; xs.len()];
        for r in 0..rows {
            for j in 0..c {
                let i = r * c + j;
                xhat[i] = (xs[i] - self.running_mean[j]) * inv_std[j];
                y[i] = self.gamma[j] * xhat[i] + self.beta[j];
            }
        }
        Ok((
            Tensor::from_parts(x.shape().to_vec(), y),
            BatchNormCache {
                xhat,
                inv_std,
                fixed: true,
            },
        ))
    }

    pub fn backward(&self, cache: &BatchNormCache, dy: &Tensor, grad: &mut BatchNorm) -> Tensor {
        let c = self.channels;
        let d = dy.data();
        let rows = d.len() / c;
        if cache.fixed {
            let mut dx = vec![0.0; d.len()];
            for r in 0..rows {
                for j in 0..c {
                    let i = r * c + j;
                    grad.gamma[j] += d[i] * cache.xhat[i];
                    grad.beta[j] += d[i];
                    dx[i] = d[i] * self.gamma[j] * cache.inv_std[j];
                }
            }
            return Tensor::from_parts(dy.shape().to_vec(), dx);
        }
        let n = rows as f64;
        let mut sum_dxhat = vec![0.0; c];
        let mut sum_dxhat_xhat = vec![0.0; c];
        for r in 0..rows {
            for j in 0..c {
                let i = r * c + j;
                grad.gamma[j] += d[i] * cache.xhat[i];
                grad.beta[j] += d[i];
                let dxhat = d[i] * self.gamma[j];
                sum_dxhat[j] += dxhat;
                sum_dxhat_xhat[j] += dxhat * cache.xhat[i];
            }
        }
        let mut dx = vec![0.0; d.len()];
        for r in 0..rows {
            for j in 0..c {
                let i = r * c + j;
                let dxhat = d[i] * self.gamma[j];
                dx[i] = cache.inv_std[j] / n * (n * dxhat - sum_dxhat[j] - cache.xhat[i] * sum_dxhat_xhat[j]);
            }
        }
        Tensor::from_parts(dy.shape().to_vec(), dx)
    }
}

impl Params for BatchNorm {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("gamma", &self.gamma);
        f("beta", &self.beta);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("gamma", &mut self.gamma);
        f("beta", &mut self.beta);
    }

    fn visit_buffers(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("running_mean", &self.running_mean);
        f("running_var", &self.running_var);
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("running_mean", &mut self.running_mean);
        f("running_var", &mut self.running_var);
    }
}

pub fn batchnorm_forward(input: &Tensor, layer: &mut BatchNorm, mode: Mode) -> Result<Tensor> {
    match mode {
        Mode::Train => layer.forward_train(input).map(|(y, _)| y),
        Mode::Eval => layer.forward_eval(input),
    }
}
