//! Same-length temporal convolution over `[batch, time, channels]` activations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::gemm::gemm;
use crate::nn::init::he_normal;
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;

/// `out_channels` filters of shape `kernel x in_channels` plus one bias per filter.
///
/// Weights are stored `[out][tap * in_channels + c]`. The kernel width is odd
/// and inputs are zero padded by `(kernel - 1) / 2` on both sides, so the time
/// axis keeps its length.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache {
    cols: Vec<f64>,
    batch: usize,
    len: usize,
}

impl Conv1d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Result<Self> {
        if kernel == 0 || kernel % 2 == 0 {
            return Err(Error::Shape(format!("conv kernel width {kernel} must be odd")));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Shape("conv channels must be positive".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * kernel * in_channels],
            bias: vec![0.0; out_channels],
        })
    }

    pub fn init<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        let mut c = Self::zeros(in_channels, out_channels, kernel)?;
        c.weight = he_normal(rng, in_channels * kernel, c.weight.len());
        Ok(c)
    }

    fn row_len(&self) -> usize {
        self.kernel * self.in_channels
    }

    fn im2col(&self, x: &[f64], batch: usize, len: usize) -> Vec<f64> {
        let (c, k, pad) = (self.in_channels, self.kernel, self.kernel / 2);
        let row = self.row_len();
        let mut cols = vec![0.0; batch * len * row];
        for b in 0..batch {
            for t in 0..len {
                let dst = &mut cols[(b * len + t) * row..(b * len + t + 1) * row];
                for tap in 0..k {
                    let src_t = t as isize + tap as isize - pad as isize;
                    if src_t < 0 || src_t >= len as isize {
                        continue;
                    }
                    let src = (b * len + src_t as usize) * c;
                    dst[tap * c..(tap + 1) * c].copy_from_slice(&x[src..src + c]);
                }
            }
        }
        cols
    }

    /// Forward pass on `[batch, time, in_channels]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Conv1dCache)> {
        let [batch, len, c] = x.shape() else {
            return Err(Error::Shape(format!("conv1d expects [batch, time, channels], got {:?}", x.shape())));
        };
        let (batch, len) = (*batch, *len);
        if *c != self.in_channels {
            return Err(Error::Shape(format!(
                "conv1d expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        let cols = self.im2col(x.data(), batch, len);
        let rows = batch * len;
        let mut out = Vec::with_capacity(rows * self.out_channels);
        for _ in 0..rows {
            out.extend_from_slice(&self.bias);
        }
        gemm(rows, self.row_len(), self.out_channels, 1.0, &cols, false, &self.weight, true, 1.0, &mut out);
        Ok((
            Tensor::from_parts(vec![batch, len, self.out_channels], out),
            Conv1dCache { cols, batch, len },
        ))
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(&self, cache: &Conv1dCache, dout: &Tensor, grad: &mut Conv1d) -> Tensor {
        let rows = cache.batch * cache.len;
        let row = self.row_len();
        let dy = dout.data();
        assert_eq!(dy.len(), rows * self.out_channels, "conv1d backward: gradient shape");
        gemm(self.out_channels, rows, row, 1.0, dy, true, &cache.cols, false, 1.0, &mut grad.weight);
        for r in 0..rows {
            for (gb, d) in grad.bias.iter_mut().zip(&dy[r * self.out_channels..(r + 1) * self.out_channels]) {
                *gb += d;
            }
        }
        let mut dcols = vec![0.0; rows * row];
        gemm(rows, self.out_channels, row, 1.0, dy, false, &self.weight, false, 0.0, &mut dcols);

        let (c, pad, len) = (self.in_channels, self.kernel / 2, cache.len);
        let mut dx = vec![0.0; rows * c];
        for b in 0..cache.batch {
            for t in 0..len {
                let src = &dcols[(b * len + t) * row..(b * len + t + 1) * row];
                for tap in 0..self.kernel {
                    let src_t = t as isize + tap as isize - pad as isize;
                    if src_t < 0 || src_t >= len as isize {
                        continue;
                    }
                    let dst = (b * len + src_t as usize) * c;
                    for (d, s) in dx[dst..dst + c].iter_mut().zip(&src[tap * c..(tap + 1) * c]) {
                        *d += s;
                    }
                }
            }
        }
        Tensor::from_parts(vec![cache.batch, len, c], dx)
    }
}

impl Params for Conv1d {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

/// Single-sequence convolution on a `[channels, time]` tensor.
pub fn conv1d_forward(input: &Tensor, layer: &Conv1d) -> Result<Tensor> {
    let [c, t] = input.shape() else {
        return Err(Error::Shape(format!("expected [channels, time], got {:?}", input.shape())));
    };
    let x = input.transpose_last().reshape(vec![1, *t, *c])?;
    let (y, _) = layer.forward(&x)?;
    let y = y.reshape(vec![*t, layer.out_channels])?;
    Ok(y.transpose_last())
}
