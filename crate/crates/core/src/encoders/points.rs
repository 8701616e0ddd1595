//! Point-cloud encoder: a per-point MLP shared across points, a symmetric
//! max-pool over points, and a linear projection. The max-pool makes the
//! encoding independent of point order.
//!
//! The last shared layer is pooled before its ReLU. `relu(max(x)) = max(relu(x))`,
//! so the encoding is the usual one, but channels that are dead for every
//! point keep a well-defined argmax instead of an all-zero tie.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::nn::activation::{relu_backward_inplace, relu_inplace};
use crate::nn::linear::Linear;
use crate::nn::params::Params;

#[derive(Debug, Clone, PartialEq)]
pub struct PointEncoderConfig {
    pub num_points: usize,
    /// Widths of the shared per-point layers; the last one is the pooled width.
    pub hidden: Vec<usize>,
    pub out_width: usize,
}

impl Default for PointEncoderConfig {
    fn default() -> Self {
        Self {
            num_points: 256,
            hidden: vec![32, 64],
            out_width: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEncoder {
    pub num_points: usize,
    pub shared: Vec<Linear>,
    pub post: Linear,
}

#[derive(Debug, Clone)]
pub struct PointCache {
    frames: usize,
    /// Input of every shared layer followed by the last layer's pre-activation.
    activations: Vec<Vec<f64>>,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
}

impl PointEncoder {
    pub fn new<R: Rng + ?Sized>(cfg: &PointEncoderConfig, rng: &mut R) -> Result<Self> {
        if cfg.hidden.is_empty() || cfg.num_points == 0 {
            return Err(Error::Config("point encoder needs points and at least one shared layer".into()));
        }
        let mut shared = Vec::with_capacity(cfg.hidden.len());
        let mut width = 3;
        for &h in &cfg.hidden {
            shared.push(Linear::init(width, h, rng)?);
            width = h;
        }
        Ok(Self {
            num_points: cfg.num_points,
            shared,
            post: Linear::init(width, cfg.out_width, rng)?,
        })
    }

    pub fn out_width(&self) -> usize {
        self.post.outputs
    }

    fn pooled_width(&self) -> usize {
        self.shared.last().expect("non-empty").outputs
    }

    /// Encode `frames` clouds stored as `[frames][num_points][xyz]`.
    pub fn forward(&self, points: &[f64], frames: usize) -> Result<(Vec<f64>, PointCache)> {
        if points.len() != frames * self.num_points * 3 {
            return Err(Error::Shape(format!(
                "point encoder expects {frames} x {} points, got {} values",
                self.num_points,
                points.len()
            )));
        }
        let mut acts = vec![points.to_vec()];
        let depth = self.shared.len();
        for (i, layer) in self.shared.iter().enumerate() {
            let mut y = layer.forward_rows(acts.last().expect("non-empty"))?;
            if i + 1 < depth {
                relu_inplace(&mut y);
            }
            acts.push(y);
        }
        let h = self.pooled_width();
        let last = acts.last().expect("non-empty");
        let mut pooled = vec![0.0; frames * h];
        let mut argmax = vec![0; frames * h];
        for f in 0..frames {
            for j in 0..h {
                let base = f * self.num_points;
                let mut best = last[base * h + j];
                let mut at = 0;
                // strict comparison keeps the lowest index among tied maxima
                for p in 1..self.num_points {
                    let v = last[(base + p) * h + j];
                    if v > best {
                        best = v;
                        at = p;
                    }
                }
                pooled[f * h + j] = best.max(0.0);
                argmax[f * h + j] = at;
            }
        }
        let out = self.post.forward_rows(&pooled)?;
        Ok((
            out,
            PointCache {
                frames,
                activations: acts,
                argmax,
                pooled,
            },
        ))
    }

    pub fn backward(&self, cache: &PointCache, dout: &[f64], grad: &mut PointEncoder) {
        let h = self.pooled_width();
        let dpooled = self
            .post
            .backward_rows(&cache.pooled, dout, &mut grad.post, true)
            .expect("input gradient requested");
        let mut d = vec![0.0; cache.frames * self.num_points * h];
        for f in 0..cache.frames {
            for j in 0..h {
                if cache.pooled[f * h + j] > 0.0 {
                    let p = cache.argmax[f * h + j];
                    d[(f * self.num_points + p) * h + j] += dpooled[f * h + j];
                }
            }
        }
        let depth = self.shared.len();
        for i in (0..depth).rev() {
            if i + 1 < depth {
                relu_backward_inplace(&cache.activations[i + 1], &mut d);
            }
            let dx = self.shared[i].backward_rows(&cache.activations[i], &d, &mut grad.shared[i], i > 0);
            if let Some(dx) = dx {
                d = dx;
            }
        }
    }
}

impl Params for PointEncoder {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, l) in self.shared.iter().enumerate() {
            l.visit(&mut |n, p| f(&format!("shared{i}.{n}"), p));
        }
        self.post.visit(&mut |n, p| f(&format!("post.{n}"), p));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, l) in self.shared.iter_mut().enumerate() {
            l.visit_mut(&mut |n, p| f(&format!("shared{i}.{n}"), p));
        }
        self.post.visit_mut(&mut |n, p| f(&format!("post.{n}"), p));
    }
}

pub fn cloud_to_input(pc: &PointCloud) -> Vec<f64> {
    pc.points.iter().flatten().copied().collect()
}

pub fn encode_points(pc: &PointCloud, enc: &PointEncoder) -> Result<Vec<f64>> {
    if pc.len() != enc.num_points {
        return Err(Error::Shape(format!(
            "point encoder expects {} points, cloud has {}",
            enc.num_points,
            pc.len()
        )));
    }
    Ok(enc.forward(&cloud_to_input(pc), 1)?.0)
}
