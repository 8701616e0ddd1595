//! SGD with momentum and a step-decay learning-rate schedule.

use crate::error::{Error, Result};
use crate::nn::params::Params;

pub const DEFAULT_BASE_LR: f64 = 1e-5;
pub const DEFAULT_DECAY_EVERY: usize = 1000;
pub const DEFAULT_DECAY_FACTOR: f64 = 0.1;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// `base_lr * 0.1^floor(epoch / 1000)`.
pub fn lr_schedule(base_lr: f64, epoch: usize) -> f64 {
    step_decay(base_lr, epoch, DEFAULT_DECAY_EVERY, DEFAULT_DECAY_FACTOR)
}

pub fn step_decay(base_lr: f64, epoch: usize, every: usize, factor: f64) -> f64 {
    base_lr * factor.powi((epoch / every.max(1)) as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub base_lr: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            base_lr: DEFAULT_BASE_LR,
            decay_every: DEFAULT_DECAY_EVERY,
            decay_factor: DEFAULT_DECAY_FACTOR,
        }
    }
}

impl Schedule {
    pub fn lr(&self, epoch: usize) -> f64 {
        step_decay(self.base_lr, epoch, self.decay_every, self.decay_factor)
    }
}

/// Momentum buffer per parameter coordinate, laid out like [`Params::flatten`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub schedule: Schedule,
    pub momentum: f64,
    pub epoch: usize,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(schedule: Schedule, momentum: f64) -> Result<Self> {
        if !(schedule.base_lr > 0.0 && schedule.base_lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", schedule.base_lr)));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum {momentum} must lie in [0, 1)")));
        }
        Ok(Self {
            schedule,
            momentum,
            epoch: 0,
            velocity: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.schedule.lr(self.epoch)
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// `v <- momentum v + g; p <- p - lr v`. Rejects non-finite gradients
    /// before touching any parameter.
    pub fn step<M: Params>(&mut self, params: &mut M, grads: &M) -> Result<()> {
        let g = grads.flatten();
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            let names = grads.names();
            let mut off = 0;
            let name = names
                .iter()
                .find(|(_, len)| {
                    off += len;
                    i < off
                })
                .map(|(n, _)| n.as_str())
                .unwrap_or("?");
            return Err(Error::NonFinite(format!("gradient of {name} is {}", g[i])));
        }
        if self.velocity.len() != g.len() {
            self.velocity = vec![0.0; g.len()];
        }
        for (v, gi) in self.velocity.iter_mut().zip(&g) {
            *v = self.momentum * *v + gi;
        }
        let lr = self.lr();
        let mut off = 0;
        let vel = &self.velocity;
        params.visit_mut(&mut |_, p| {
            let n = p.len();
            for (x, v) in p.iter_mut().zip(&vel[off..off + n]) {
                *x -= lr * v;
            }
            off += n;
        });
        Ok(())
    }
}
