//! Strided 2-D convolution on channels-last `[frames, height, width, channels]` images.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::gemm::gemm;
use crate::nn::init::he_normal;
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out][(ky * kernel + kx) * in_channels + c]`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Conv2dCache {
    cols: Vec<f64>,
    in_shape: [usize; 4],
    out_hw: (usize, usize),
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
            return Err(Error::Shape("conv2d dimensions must be positive".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: vec![0.0; out_channels * kernel * kernel * in_channels],
            bias: vec![0.0; out_channels],
        })
    }

    pub fn init<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut c = Self::zeros(in_channels, out_channels, kernel, stride, padding)?;
        c.weight = he_normal(rng, kernel * kernel * in_channels, c.weight.len());
        Ok(c)
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < self.kernel || wp < self.kernel {
            return Err(Error::Shape(format!("image {h}x{w} smaller than kernel {}", self.kernel)));
        }
        Ok(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }

    fn row_len(&self) -> usize {
        self.kernel * self.kernel * self.in_channels
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Conv2dCache)> {
        let &[f, h, w, c] = x.shape() else {
            return Err(Error::Shape(format!("conv2d expects [frames, h, w, c], got {:?}", x.shape())));
        };
        if c != self.in_channels {
            return Err(Error::Shape(format!("conv2d expects {} channels, got {c}", self.in_channels)));
        }
        let (ho, wo) = self.output_hw(h, w)?;
        let row = self.row_len();
        let rows = f * ho * wo;
        let xs = x.data();
        let mut cols = vec![0.0; rows * row];
        for fi in 0..f {
            for oy in 0..ho {
                for ox in 0..wo {
                    let r = (fi * ho + oy) * wo + ox;
                    let dst = &mut cols[r * row..(r + 1) * row];
                    for ky in 0..self.kernel {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let src = ((fi * h + iy as usize) * w + ix as usize) * c;
                            let o = (ky * self.kernel + kx) * c;
                            dst[o..o + c].copy_from_slice(&xs[src..src + c]);
                        }
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(rows * self.out_channels);
        for _ in 0..rows {
            out.extend_from_slice(&self.bias);
        }
        gemm(rows, row, self.out_channels, 1.0, &cols, false, &self.weight, true, 1.0, &mut out);
        Ok((
            Tensor::from_parts(vec![f, ho, wo, self.out_channels], out),
            Conv2dCache {
                cols,
                in_shape: [f, h, w, c],
                out_hw: (ho, wo),
            },
        ))
    }

    /// Accumulates parameter gradients; the input gradient is only formed when requested.
    pub fn backward(&self, cache: &Conv2dCache, dout: &[f64], grad: &mut Conv2d, need_input: bool) -> Option<Tensor> {
        let [f, h, w, c] = cache.in_shape;
        let (ho, wo) = cache.out_hw;
        let rows = f * ho * wo;
        let row = self.row_len();
        assert_eq!(dout.len(), rows * self.out_channels, "conv2d backward: gradient shape");
        gemm(self.out_channels, rows, row, 1.0, dout, true, &cache.cols, false, 1.0, &mut grad.weight);
        for r in 0..rows {
            for (gb, d) in grad.bias.iter_mut().zip(&dout[r * self.out_channels..(r + 1) * self.out_channels]) {
                *gb += d;
            }
        }
        if !need_input {
            return None;
        }
        let mut dcols = vec![0.0; rows * row];
        gemm(rows, self.out_channels, row, 1.0, dout, false, &self.weight, false, 0.0, &mut dcols);
        let mut dx = vec![0.0; f * h * w * c];
        for fi in 0..f {
            for oy in 0..ho {
                for ox in 0..wo {
                    let r = (fi * ho + oy) * wo + ox;
                    let src = &dcols[r * row..(r + 1) * row];
                    for ky in 0..self.kernel {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let dst = ((fi * h + iy as usize) * w + ix as usize) * c;
                            let o = (ky * self.kernel + kx) * c;
                            for (d, s) in dx[dst..dst + c].iter_mut().zip(&src[o..o + c]) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
        Some(Tensor::from_parts(vec![f, h, w, c], dx))
    }
}

impl Params for Conv2d {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}
