//! The end-to-end network: per-frame encoders, feature concatenation and the
//! temporal block, trained jointly.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoders::points::{PointCache, PointEncoder, PointEncoderConfig};
use crate::encoders::rgb::{RgbCache, RgbEncoder, RgbEncoderConfig};
use crate::error::{Error, Result};
use crate::nn::batchnorm::{BatchStats, Mode};
use crate::nn::params::Params;
use crate::nn::tensor::Tensor;
use crate::tcn::model::{TcnCache, TcnConfig, TcnModel};
use crate::tcn::store::FrameStore;

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    SingleFrameRgb,
    RgbTcn,
    PcTcn,
    RpcTcn,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::SingleFrameRgb, Variant::RgbTcn, Variant::PcTcn, Variant::RpcTcn];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SingleFrameRgb => "single_frame_rgb",
            Variant::RgbTcn => "rgb_tcn",
            Variant::PcTcn => "pc_tcn",
            Variant::RpcTcn => "rpc_tcn",
        }
    }

    pub fn uses_rgb(self) -> bool {
        self != Variant::PcTcn
    }

    pub fn uses_points(self) -> bool {
        matches!(self, Variant::PcTcn | Variant::RpcTcn)
    }

    pub fn is_temporal(self) -> bool {
        self != Variant::SingleFrameRgb
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub variant: Variant,
    pub rgb: RgbEncoderConfig,
    pub points: PointEncoderConfig,
    pub kernel: usize,
    pub widths: Vec<usize>,
    /// Frames on each side of the labelled one. Forced to 0 for the single-frame variant.
    pub half_width: usize,
}

impl NetConfig {
    pub fn window_half_width(&self) -> usize {
        if self.variant.is_temporal() {
            self.half_width
        } else {
            0
        }
    }

    pub fn feature_width(&self) -> usize {
        let mut d = 0;
        if self.variant.uses_rgb() {
            d += self.rgb.out_width;
        }
        if self.variant.uses_points() {
            d += self.points.out_width;
        }
        d
    }
}

#[derive(Debug)]
struct Tape {
    frames: usize,
    /// Row of the unique-frame feature matrix for every (window, offset).
    rows: Vec<usize>,
    rgb: Option<RgbCache>,
    points: Option<PointCache>,
    tcn: TcnCache,
}

#[derive(Debug)]
pub struct ForceNet {
    pub variant: Variant,
    pub half_width: usize,
    pub rgb: Option<RgbEncoder>,
    pub points: Option<PointEncoder>,
    pub tcn: TcnModel,
    /// Label mean and standard deviation; the head regresses standardized force.
    pub target: Vec<f64>,
    tape: Option<Tape>,
}

impl Clone for ForceNet {
    fn clone(&self) -> Self {
        Self {
            variant: self.variant,
            half_width: self.half_width,
            rgb: self.rgb.clone(),
            points: self.points.clone(),
            tcn: self.tcn.clone(),
            target: self.target.clone(),
            tape: None,
        }
    }
}

impl PartialEq for ForceNet {
    fn eq(&self, other: &Self) -> bool {
        self.variant == other.variant
            && self.half_width == other.half_width
            && self.rgb == other.rgb
            && self.points == other.points
            && self.tcn == other.tcn
            && self.target == other.target
    }
}

impl ForceNet {
    pub fn new(cfg: &NetConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rgb = if cfg.variant.uses_rgb() {
            Some(RgbEncoder::new(&cfg.rgb, &mut rng)?)
        } else {
            None
        };
        let points = if cfg.variant.uses_points() {
            Some(PointEncoder::new(&cfg.points, &mut rng)?)
        } else {
            None
        };
        let n = cfg.window_half_width();
        let tcn = TcnModel::new(
            &TcnConfig {
                input_width: cfg.feature_width(),
                window_len: 2 * n + 1,
                kernel: cfg.kernel,
                widths: cfg.widths.clone(),
            },
            &mut rng,
        )?;
        Ok(Self {
            variant: cfg.variant,
            half_width: n,
            rgb,
            points,
            tcn,
            target: vec![0.0, 1.0],
            tape: None,
        })
    }

    pub fn window_len(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Sets label standardization from training labels.
    pub fn fit_target(&mut self, labels: &[f64]) {
        if labels.is_empty() {
            return;
        }
        let n = labels.len() as f64;
        let mean = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        self.target = vec![mean, if std > 1e-12 { std } else { 1.0 }];
    }

    /// Centers of every window that fits in a sequence of `len` frames.
    pub fn valid_centers(&self, len: usize) -> std::ops::Range<usize> {
        let n = self.half_width;
        if len < 2 * n + 1 { 0..0 } else { n..len - n }
    }

    fn check_store(&self, store: &FrameStore, centers: &[usize]) -> Result<()> {
        if let Some(rgb) = &self.rgb {
            if (store.rgb_height, store.rgb_width) != (rgb.height, rgb.width) {
                return Err(Error::Shape(format!(
                    "rgb frames are {}x{}, network expects {}x{}",
                    store.rgb_width, store.rgb_height, rgb.width, rgb.height
                )));
            }
        }
        if let Some(pe) = &self.points {
            if store.num_points != pe.num_points {
                return Err(Error::Shape(format!(
                    "clouds have {} points, network expects {}",
                    store.num_points, pe.num_points
                )));
            }
        }
        let valid = self.valid_centers(store.len());
        if let Some(&c) = centers.iter().find(|c| !valid.contains(c)) {
            return Err(Error::Validation(format!(
                "window centered at frame {c} needs frames outside 0..{}",
                store.len()
            )));
        }
        Ok(())
    }

    /// Unique frames touched by the windows, in ascending order, and the
    /// row of each (window, offset) pair among them.
    fn gather(&self, centers: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let n = self.half_width;
        let mut frames: Vec<usize> = centers.iter().flat_map(|&c| c - n..=c + n).collect();
        frames.sort_unstable();
        frames.dedup();
        let rows = centers
            .iter()
            .flat_map(|&c| c - n..=c + n)
            .map(|f| frames.binary_search(&f).expect("gathered"))
            .collect();
        (frames, rows)
    }

    /// Per-frame features `[frames][feature width]`, RGB part first.
    /// Concatenated `[rgb | points]` encoder features of `frames`, one row each.
    pub fn frame_features(&self, store: &FrameStore, frames: &[usize]) -> Result<Vec<Vec<f64>>> {
        if let Some(&bad) = frames.iter().find(|&&f| f >= store.len()) {
            return Err(Error::Validation(format!("frame {bad} is outside a store of {}", store.len())));
        }
        let d = self.tcn.input_width();
        let mut out = Vec::with_capacity(frames.len());
        for chunk in frames.chunks(256) {
            let (feats, _, _) = self.encode(store, chunk)?;
            out.extend(feats.chunks(d).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    fn encode(
        &self,
        store: &FrameStore,
        frames: &[usize],
    ) -> Result<(Vec<f64>, Option<RgbCache>, Option<PointCache>)> {
        let count = frames.len();
        let mut parts: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut rgb_cache = None;
        let mut point_cache = None;
        if let Some(enc) = &self.rgb {
            let data = frames.iter().flat_map(|&f| store.rgb_frame(f).iter().copied()).collect();
            let x = Tensor::from_parts(vec![count, enc.height, enc.width, 3], data);
            let (y, cache) = enc.forward(&x)?;
            parts.push((enc.out_width(), y.into_data()));
            rgb_cache = Some(cache);
        }
        if let Some(enc) = &self.points {
            let data: Vec<f64> = frames.iter().flat_map(|&f| store.points_frame(f).iter().copied()).collect();
            let (y, cache) = enc.forward(&data, count)?;
            parts.push((enc.out_width(), y));
            point_cache = Some(cache);
        }
        let width: usize = parts.iter().map(|p| p.0).sum();
        let mut feats = Vec::with_capacity(count * width);
        for r in 0..count {
            for (w, p) in &parts {
                feats.extend_from_slice(&p[r * w..(r + 1) * w]);
            }
        }
        Ok((feats, rgb_cache, point_cache))
    }

    fn window_tensor(&self, feats: &[f64], rows: &[usize], windows: usize) -> Tensor {
        let d = self.tcn.input_width();
        let mut x = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            x.extend_from_slice(&feats[r * d..(r + 1) * d]);
        }
        Tensor::from_parts(vec![windows, self.window_len(), d], x)
    }

    fn denormalize(&self, raw: Vec<f64>) -> Vec<f64> {
        raw.into_iter().map(|v| self.target[0] + self.target[1] * v).collect()
    }

    /// Forward pass over windows centered at `centers`, recording what
    /// [`ForceNet::backward`] needs. Predictions are in newtons. In train mode the
    /// batch statistics are returned but not yet folded into the running ones.
    pub fn forward_recorded(
        &mut self,
        store: &FrameStore,
        centers: &[usize],
        mode: Mode,
    ) -> Result<(Vec<f64>, Vec<BatchStats>)> {
        self.check_store(store, centers)?;
        let (frames, rows) = self.gather(centers);
        let (feats, rgb, points) = self.encode(store, &frames)?;
        let x = self.window_tensor(&feats, &rows, centers.len());
        let (raw, tcn, stats) = self.tcn.forward_recorded(&x, mode)?;
        self.tape = Some(Tape {
            frames: frames.len(),
            rows,
            rgb,
            points,
            tcn,
        });
        Ok((self.denormalize(raw), stats))
    }

    pub fn update_running(&mut self, stats: &[BatchStats]) {
        self.tcn.update_running(stats);
    }

    /// Accumulates into `grad` the gradient for `d loss / d prediction` (newtons)
    /// of the last recorded forward pass, which is consumed.
    pub fn backward(&mut self, dpred: &[f64], grad: &mut ForceNet) -> Result<()> {
        let tape = self
            .tape
            .take()
            .ok_or_else(|| Error::State("backward called without a recorded forward pass".into()))?;
        let windows = tape.rows.len() / self.window_len();
        if dpred.len() != windows {
            return Err(Error::Shape(format!(
                "{} prediction gradients for {windows} windows",
                dpred.len()
            )));
        }
        let draw: Vec<f64> = dpred.iter().map(|g| g * self.target[1]).collect();
        let dx = self.tcn.backward(&tape.tcn, &draw, &mut grad.tcn);
        let d = self.tcn.input_width();
        let mut dfeat = vec![0.0; tape.frames * d];
        for (k, &r) in tape.rows.iter().enumerate() {
            for (a, b) in dfeat[r * d..(r + 1) * d].iter_mut().zip(&dx.data()[k * d..(k + 1) * d]) {
                *a += b;
            }
        }
        let mut offset = 0;
        if let (Some(enc), Some(cache), Some(g)) = (&self.rgb, &tape.rgb, grad.rgb.as_mut()) {
            let w = enc.out_width();
            let part = columns(&dfeat, d, offset, w);
            enc.backward(cache, &part, g);
            offset += w;
        }
        if let (Some(enc), Some(cache), Some(g)) = (&self.points, &tape.points, grad.points.as_mut()) {
            let part = columns(&dfeat, d, offset, enc.out_width());
            enc.backward(cache, &part, g);
        }
        Ok(())
    }

    /// Inference-mode predictions in newtons, one per center, in order.
    pub fn predict_centers(&self, store: &FrameStore, centers: &[usize]) -> Result<Vec<f64>> {
        self.check_store(store, centers)?;
        let chunks: Vec<Vec<f64>> = centers
            .par_chunks(EVAL_CHUNK)
            .map(|chunk| {
                let (frames, rows) = self.gather(chunk);
                let mut feats = Vec::new();
                for block in frames.chunks(EVAL_CHUNK) {
                    feats.extend(self.encode(store, block)?.0);
                }
                let x = self.window_tensor(&feats, &rows, chunk.len());
                self.tcn.forward_eval(&x).map(|raw| self.denormalize(raw))
            })
            .collect::<Result<_>>()?;
        Ok(chunks.concat())
    }
}

fn columns(m: &[f64], width: usize, offset: usize, take: usize) -> Vec<f64> {
    m.chunks_exact(width)
        .flat_map(|row| row[offset..offset + take].iter().copied())
        .collect()
}

impl Params for ForceNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[f64])) {
        if let Some(e) = &self.rgb {
            e.visit(&mut |n, p| f(&format!("rgb.{n}"), p));
        }
        if let Some(e) = &self.points {
            e.visit(&mut |n, p| f(&format!("points.{n}"), p));
        }
        self.tcn.visit(&mut |n, p| f(&format!("tcn.{n}"), p));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        if let Some(e) = &mut self.rgb {
            e.visit_mut(&mut |n, p| f(&format!("rgb.{n}"), p));
        }
        if let Some(e) = &mut self.points {
            e.visit_mut(&mut |n, p| f(&format!("points.{n}"), p));
        }
        self.tcn.visit_mut(&mut |n, p| f(&format!("tcn.{n}"), p));
    }

    fn visit_buffers(&self, f: &mut dyn FnMut(&str, &[f64])) {
        self.tcn.visit_buffers(&mut |n, p| f(&format!("tcn.{n}"), p));
        f("target", &self.target);
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.tcn.visit_buffers_mut(&mut |n, p| f(&format!("tcn.{n}"), p));
        f("target", &mut self.target);
    }
}
