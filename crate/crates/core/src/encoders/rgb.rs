//! Small strided conv net standing in for a pretrained image backbone.

use rand::Rng;

use crate::error::{Error, Result};
use crate::io::image::RgbImage;
use crate::nn::activation::{relu_backward_inplace, relu_inplace};
use crate::nn::conv2d::{Conv2d, Conv2dCache};
use crate::nn::linear::Linear;
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct RgbEncoderConfig {
    pub height: usize,
    pub width: usize,
    /// Output channels of each 3x3 stride-2 conv layer.
    pub channels: Vec<usize>,
    pub out_width: usize,
}

impl Default for RgbEncoderConfig {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            channels: vec![8, 16],
            out_width: 64,
        }
    }
}

/// Conv(3x3, stride 2) + ReLU blocks, then a linear projection to `out_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbEncoder {
    pub height: usize,
    pub width: usize,
    pub convs: Vec<Conv2d>,
    pub fc: Linear,
}

#[derive(Debug, Clone)]
pub struct RgbCache {
    convs: Vec<Conv2dCache>,
    activations: Vec<Tensor>,
}

/// Map 8-bit channels to `[-0.5, 0.5]`, channels-last.
pub fn rgb_to_input(img: &RgbImage) -> Vec<f64> {
    img.data().iter().map(|&v| f64::from(v) / 255.0 - 0.5).collect()
}

impl RgbEncoder {
    pub fn new<R: Rng + ?Sized>(cfg: &RgbEncoderConfig, rng: &mut R) -> Result<Self> {
        if cfg.channels.is_empty() {
            return Err(Error::Config("rgb encoder needs at least one conv layer".into()));
        }
        let mut convs = Vec::with_capacity(cfg.channels.len());
        let (mut h, mut w, mut c) = (cfg.height, cfg.width, 3);
        for &out in &cfg.channels {
            let conv = Conv2d::init(c, out, 3, 2, 1, rng)?;
            (h, w) = conv.output_hw(h, w)?;
            c = out;
            convs.push(conv);
        }
        let fc = Linear::init(h * w * c, cfg.out_width, rng)?;
        Ok(Self {
            height: cfg.height,
            width: cfg.width,
            convs,
            fc,
        })
    }

    pub fn out_width(&self) -> usize {
        self.fc.outputs
    }

    fn check(&self, x: &Tensor) -> Result<usize> {
        match x.shape() {
            &[f, h, w, 3] if h == self.height && w == self.width => Ok(f),
            s => Err(Error::Shape(format!(
                "rgb encoder expects [frames, {}, {}, 3], got {s:?}",
                self.height, self.width
            ))),
        }
    }

    /// Encode `[frames, height, width, 3]` into `[frames, out_width]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, RgbCache)> {
        let frames = self.check(x)?;
        let mut caches = Vec::with_capacity(self.convs.len());
        let mut acts: Vec<Tensor> = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let input = acts.last().unwrap_or(x);
            let (mut y, cache) = conv.forward(input)?;
            relu_inplace(y.data_mut());
            caches.push(cache);
            acts.push(y);
        }
        let flat = acts.last().expect("at least one conv");
        let out = self.fc.forward_rows(flat.data())?;
        Ok((
            Tensor::from_parts(vec![frames, self.out_width()], out),
            RgbCache {
                convs: caches,
                activations: acts,
            },
        ))
    }

    /// Accumulate parameter gradients for `d loss / d output` (`[frames, out_width]`).
    pub fn backward(&self, cache: &RgbCache, dout: &[f64], grad: &mut RgbEncoder) {
        let flat = cache.activations.last().expect("at least one conv");
        let mut d = self
            .fc
            .backward_rows(flat.data(), dout, &mut grad.fc, true)
            .expect("input gradient requested");
        for i in (0..self.convs.len()).rev() {
            relu_backward_inplace(cache.activations[i].data(), &mut d);
            let dx = self.convs[i].backward(&cache.convs[i], &d, &mut grad.convs[i], i > 0);
            if let Some(dx) = dx {
                d = dx.into_data();
            }
        }
    }
}

impl Params for RgbEncoder {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (i, c) in self.convs.iter().enumerate() {
            c.visit(&mut |n, p| f(&format!("conv{i}.{n}"), p));
        }
        self.fc.visit(&mut |n, p| f(&format!("fc.{n}"), p));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.visit_mut(&mut |n, p| f(&format!("conv{i}.{n}"), p));
        }
        self.fc.visit_mut(&mut |n, p| f(&format!("fc.{n}"), p));
    }
}

pub fn encode_rgb(img: &RgbImage, enc: &RgbEncoder) -> Result<Vec<f64>> {
    if img.width() != enc.width || img.height() != enc.height {
        return Err(Error::Shape(format!(
            "image {}x{} does not match encoder input {}x{}",
            img.width(),
            img.height(),
            enc.width,
            enc.height
        )));
    }
    let x = Tensor::from_parts(vec![1, enc.height, enc.width, 3], rgb_to_input(img));
    Ok(enc.forward(&x)?.0.into_data())
}
