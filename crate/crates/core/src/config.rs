//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::encoders::points::PointEncoderConfig;
use crate::encoders::rgb::RgbEncoderConfig;
use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::io::sync::DEFAULT_TOLERANCE;
use crate::nn::optim::{Schedule, DEFAULT_BASE_LR, DEFAULT_DECAY_EVERY, DEFAULT_DECAY_FACTOR, DEFAULT_MOMENTUM};
use crate::synthgen::SceneConfig;
use crate::tcn::net::{NetConfig, Variant};
use crate::tcn::train::TrainConfig;

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("data_dir", "dataset directory (manifest.jsonl + frames/)"),
    ("seed", "master seed for generation, split, initialization and batch order"),
    ("sync_tolerance_s", "timestamp matching tolerance in seconds"),
    ("focal", "depth camera focal length in pixels (fx = fy)"),
    ("cx", "principal point x, pixels; default image center"),
    ("cy", "principal point y, pixels; default image center"),
    ("num_points", "points per cloud after downsampling"),
    ("rgb_size", "RGB frame side in pixels"),
    ("depth_size", "depth frame side in pixels"),
    ("surface_mm", "side of the simulated surface patch, mm"),
    ("base_depth_mm", "camera to flat surface distance, mm"),
    ("tool_radius_mm", "width of the indentation bump, mm"),
    ("stiffness", "linear spring constant, N/mm"),
    ("stiffness_quadratic", "quadratic spring term, N/mm^2"),
    ("smoothness", "trajectory low-pass coefficient in [0, 1)"),
    ("trajectory_noise", "trajectory excitation scale"),
    ("max_indentation_mm", "indentation upper bound, mm"),
    ("fps", "frame rate"),
    ("duration_s", "sequence length, seconds"),
    ("rgb_noise", "RGB pixel noise standard deviation, 8-bit levels"),
    ("depth_noise_mm", "depth noise standard deviation, mm"),
    ("force_noise_n", "force label noise standard deviation, N"),
    ("jitter_s", "depth/force timestamp offset from the RGB clock, seconds"),
    ("variant", "single_frame_rgb | rgb_tcn | pc_tcn | rpc_tcn"),
    ("rgb_channels", "comma-separated conv widths of the RGB encoder"),
    ("rgb_features", "RGB feature width"),
    ("point_hidden", "comma-separated shared-MLP widths of the point encoder"),
    ("point_features", "point feature width"),
    ("tcn_widths", "comma-separated temporal conv widths"),
    ("tcn_kernel", "temporal kernel width (odd)"),
    ("half_width", "frames on each side of the labelled frame"),
    ("epochs", "total training epochs"),
    ("batch_size", "windows per minibatch"),
    ("group", "consecutive windows kept together in a minibatch"),
    ("lr", "base learning rate"),
    ("lr_decay_every", "epochs between learning-rate decays"),
    ("lr_decay_factor", "learning-rate decay factor"),
    ("momentum", "SGD momentum"),
    ("checkpoint", "checkpoint path"),
    ("history_csv", "training history CSV path"),
    ("out_dir", "directory for metrics, predictions and plots"),
    ("split", "evaluated split: train | val | test | all"),
    ("predictions_csv", "predictions CSV read by plot"),
    ("bins_csv", "per-bin CSV read by plot"),
    ("features_csv", "per-frame encoder features written by infer"),
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if cfg.entries.contains_key(k) {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", i + 1)));
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets or replaces a key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(Error::Config(format!("key `{key}` has an empty value")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn require_keys(&self, keys: &[&str]) -> Result<()> {
        match keys.iter().find(|k| !self.contains(k)) {
            Some(k) => Err(Error::Config(format!("missing required key `{k}`"))),
            None => Ok(()),
        }
    }

    pub fn list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        let Some(v) = self.raw(key) else {
            return Ok(default.to_vec());
        };
        let list: Vec<usize> = v
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("key `{key}`: expected comma-separated integers, got `{v}`")))?;
        if list.is_empty() || list.contains(&0) {
            return Err(Error::Config(format!("key `{key}`: widths must be positive")));
        }
        Ok(list)
    }

    /// Entries in key order, for echoing at the top of output files.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.entries.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Keys shared by both configs whose values differ.
    pub fn conflicts(&self, other: &RunConfig, keys: &[&str]) -> Vec<String> {
        keys.iter()
            .filter(|k| matches!((self.raw(k), other.raw(k)), (Some(a), Some(b)) if a != b))
            .map(|k| k.to_string())
            .collect()
    }
}

/// Keys that fix the network's parameter layout.
pub const MODEL_KEYS: &[&str] = &[
    "variant",
    "rgb_size",
    "num_points",
    "rgb_channels",
    "rgb_features",
    "point_hidden",
    "point_features",
    "tcn_widths",
    "tcn_kernel",
    "half_width",
];

pub fn scene_config(cfg: &RunConfig) -> Result<SceneConfig> {
    let d = SceneConfig::default();
    let scene = SceneConfig {
        rgb_size: cfg.get_or("rgb_size", d.rgb_size)?,
        depth_size: cfg.get_or("depth_size", d.depth_size)?,
        surface_mm: cfg.get_or("surface_mm", d.surface_mm)?,
        base_depth_mm: cfg.get_or("base_depth_mm", d.base_depth_mm)?,
        tool_radius_mm: cfg.get_or("tool_radius_mm", d.tool_radius_mm)?,
        stiffness: cfg.get_or("stiffness", d.stiffness)?,
        stiffness_quadratic: cfg.get_or("stiffness_quadratic", d.stiffness_quadratic)?,
        smoothness: cfg.get_or("smoothness", d.smoothness)?,
        trajectory_noise: cfg.get_or("trajectory_noise", d.trajectory_noise)?,
        max_indentation_mm: cfg.get_or("max_indentation_mm", d.max_indentation_mm)?,
        fps: cfg.get_or("fps", d.fps)?,
        duration_s: cfg.get_or("duration_s", d.duration_s)?,
        rgb_noise: cfg.get_or("rgb_noise", d.rgb_noise)?,
        depth_noise_mm: cfg.get_or("depth_noise_mm", d.depth_noise_mm)?,
        force_noise_n: cfg.get_or("force_noise_n", d.force_noise_n)?,
        jitter_s: cfg.get_or("jitter_s", d.jitter_s)?,
        seed: cfg.require("seed")?,
    };
    scene.validate()?;
    Ok(scene)
}

pub const DEFAULT_FOCAL: f64 = 133.3;

pub fn intrinsics(cfg: &RunConfig, width: usize, height: usize) -> Result<CameraIntrinsics> {
    let c = CameraIntrinsics::centered(width, height, cfg.get_or("focal", DEFAULT_FOCAL)?);
    CameraIntrinsics::new(c.fx, c.fy, cfg.get_or("cx", c.cx)?, cfg.get_or("cy", c.cy)?)
}

pub fn net_config(cfg: &RunConfig) -> Result<NetConfig> {
    let rgb = RgbEncoderConfig::default();
    let points = PointEncoderConfig::default();
    let side = cfg.get_or("rgb_size", rgb.height)?;
    let kernel: usize = cfg.get_or("tcn_kernel", 3)?;
    if kernel % 2 == 0 {
        return Err(Error::Config(format!("tcn_kernel {kernel} must be odd")));
    }
    Ok(NetConfig {
        variant: cfg.get_or("variant", Variant::RpcTcn)?,
        rgb: RgbEncoderConfig {
            height: side,
            width: side,
            channels: cfg.list_or("rgb_channels", &rgb.channels)?,
            out_width: cfg.get_or("rgb_features", rgb.out_width)?,
        },
        points: PointEncoderConfig {
            num_points: cfg.get_or("num_points", points.num_points)?,
            hidden: cfg.list_or("point_hidden", &points.hidden)?,
            out_width: cfg.get_or("point_features", points.out_width)?,
        },
        kernel,
        widths: cfg.list_or("tcn_widths", &[96, 64, 32])?,
        half_width: cfg.get_or("half_width", crate::tcn::window::DEFAULT_HALF_WIDTH)?,
    })
}

pub fn train_config(cfg: &RunConfig, deterministic: bool) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let batch_size: usize = cfg.get_or("batch_size", d.batch_size)?;
    if batch_size < 2 {
        return Err(Error::Config(format!("batch_size {batch_size} must be at least 2")));
    }
    Ok(TrainConfig {
        epochs: cfg.get_or("epochs", d.epochs)?,
        batch_size,
        group: cfg.get_or("group", d.group)?,
        schedule: Schedule {
            base_lr: cfg.get_or("lr", DEFAULT_BASE_LR)?,
            decay_every: cfg.get_or("lr_decay_every", DEFAULT_DECAY_EVERY)?,
            decay_factor: cfg.get_or("lr_decay_factor", DEFAULT_DECAY_FACTOR)?,
        },
        momentum: cfg.get_or("momentum", DEFAULT_MOMENTUM)?,
        seed: cfg.require("seed")?,
        record_wall_time: !deterministic,
    })
}

pub fn sync_tolerance(cfg: &RunConfig) -> Result<f64> {
    let t: f64 = cfg.get_or("sync_tolerance_s", DEFAULT_TOLERANCE)?;
    if !(t >= 0.0) {
        return Err(Error::Config(format!("sync_tolerance_s {t} must be non-negative")));
    }
    Ok(t)
}
