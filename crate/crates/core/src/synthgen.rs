//! Seeded synthetic indentation sequences: a tool presses a Gaussian dent into
//! a flat surface, the force follows a linear spring law, and RGB frames show
//! the dent only through shading.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::dataset::{FRAMES_DIR, MANIFEST_FILE};
use crate::io::image::{encode_pgm16, encode_ppm, DepthImage, RgbImage};
use crate::io::manifest::{StreamKind, StreamRecord, Streams};

const LIGHT: [f64; 3] = [0.45, -0.35, 0.82];
const ALBEDO: [f64; 3] = [225.0, 135.0, 120.0];
const AMBIENT: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub rgb_size: usize,
    pub depth_size: usize,
    /// Side of the visible square patch of surface, mm.
    pub surface_mm: f64,
    pub base_depth_mm: f64,
    pub tool_radius_mm: f64,
    /// Linear stiffness, N/mm.
    pub stiffness: f64,
    /// Quadratic stiffness term, N/mm²; 0 keeps the spring linear.
    pub stiffness_quadratic: f64,
    /// Low-pass coefficient of the trajectory velocities, in [0, 1).
    pub smoothness: f64,
    /// Scale of the random accelerations driving position (mm/frame) and indentation (fraction/frame).
    pub trajectory_noise: f64,
    pub max_indentation_mm: f64,
    pub fps: f64,
    pub duration_s: f64,
    /// Per-pixel standard deviation in 8-bit levels.
    pub rgb_noise: f64,
    pub depth_noise_mm: f64,
    pub force_noise_n: f64,
    /// Depth and force timestamps are offset from the RGB clock by exactly this much, with random sign.
    pub jitter_s: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            rgb_size: 32,
            depth_size: 16,
            surface_mm: 120.0,
            base_depth_mm: 1000.0,
            tool_radius_mm: 15.0,
            stiffness: 5.0,
            stiffness_quadratic: 0.0,
            smoothness: 0.9,
            trajectory_noise: 1.0,
            max_indentation_mm: 40.0,
            fps: 30.0,
            duration_s: 10.0,
            rgb_noise: 2.0,
            depth_noise_mm: 0.5,
            force_noise_n: 0.0,
            jitter_s: 0.002,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.stiffness > 0.0) || self.stiffness_quadratic < 0.0 {
            return fail(format!("stiffness {} must be positive", self.stiffness));
        }
        if !(self.fps > 0.0) || !(self.duration_s > 0.0) {
            return fail("fps and duration must be positive".into());
        }
        if !(self.max_indentation_mm >= 0.0 && self.max_indentation_mm < self.base_depth_mm) {
            return fail(format!(
                "max indentation {} must lie in [0, base depth {})",
                self.max_indentation_mm, self.base_depth_mm
            ));
        }
        if self.rgb_size == 0 || self.depth_size == 0 || !(self.surface_mm > 0.0) || !(self.tool_radius_mm > 0.0) {
            return fail("image sizes, surface extent and tool radius must be positive".into());
        }
        if !(0.0..1.0).contains(&self.smoothness) {
            return fail(format!("smoothness {} must lie in [0, 1)", self.smoothness));
        }
        if self.trajectory_noise < 0.0 || self.rgb_noise < 0.0 || self.depth_noise_mm < 0.0 || self.force_noise_n < 0.0 {
            return fail("noise levels must be non-negative".into());
        }
        if !(self.jitter_s >= 0.0 && self.jitter_s < 0.5 / self.fps) {
            return fail(format!(
                "jitter {} s must be below half the frame period {} s",
                self.jitter_s,
                0.5 / self.fps
            ));
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    /// z-force in newtons for an indentation in mm, negative when pressing.
    pub fn force(&self, indentation: f64) -> f64 {
        -(self.stiffness * indentation + self.stiffness_quadratic * indentation * indentation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolState {
    /// Tool position in surface coordinates (mm, origin at the patch center).
    pub x: f64,
    pub y: f64,
    pub indentation: f64,
}

/// Low-pass filtered random walk over position and indentation, starting at
/// rest at the patch center with half the maximum indentation.
pub fn generate_trajectory(cfg: &SceneConfig) -> Result<Vec<ToolState>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 * cfg.surface_mm - cfg.tool_radius_mm;
    let a = cfg.smoothness;
    let (mut x, mut y, mut s) = (0.0f64, 0.0f64, 0.5f64);
    let (mut vx, mut vy, mut vs) = (0.0f64, 0.0f64, 0.0f64);
    let mut out = Vec::with_capacity(cfg.num_frames());
    for _ in 0..cfg.num_frames() {
        out.push(ToolState {
            x,
            y,
            indentation: s * cfg.max_indentation_mm,
        });
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        vx = a * vx + (1.0 - a) * cfg.trajectory_noise * draw();
        vy = a * vy + (1.0 - a) * cfg.trajectory_noise * draw();
        vs = a * vs + (1.0 - a) * 0.05 * cfg.trajectory_noise * draw();
        (x, vx) = bounded(x + vx, vx, -half.max(0.0), half.max(0.0));
        (y, vy) = bounded(y + vy, vy, -half.max(0.0), half.max(0.0));
        (s, vs) = bounded(s + vs, vs, 0.0, 1.0);
    }
    Ok(out)
}

/// Clip to `[lo, hi]`, stopping the motion at the wall.
fn bounded(v: f64, vel: f64, lo: f64, hi: f64) -> (f64, f64) {
    if v < lo {
        (lo, 0.0)
    } else if v > hi {
        (hi, 0.0)
    } else {
        (v, vel)
    }
}

/// Dent depth below the flat surface and its gradient at surface point `(u, v)`.
fn dent(state: &ToolState, cfg: &SceneConfig, u: f64, v: f64) -> (f64, f64, f64) {
    let (dx, dy) = (u - state.x, v - state.y);
    let r2 = cfg.tool_radius_mm * cfg.tool_radius_mm;
    let h = state.indentation * (-(dx * dx + dy * dy) / (2.0 * r2)).exp();
    (h, -h * dx / r2, -h * dy / r2)
}

/// Surface coordinate of the center of pixel `i` in an image of `size` pixels.
fn pixel_center(i: usize, size: usize, extent: f64) -> f64 {
    (i as f64 + 0.5) / size as f64 * extent - 0.5 * extent
}

fn frame_rng(cfg: &SceneConfig, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Noise-free depth, shaded RGB and force for one tool state, and the
/// observed (noisy) versions drawn from `rng`.
pub fn render_frame_with<R: Rng + ?Sized>(
    state: &ToolState,
    cfg: &SceneConfig,
    rng: &mut R,
) -> Result<(RgbImage, DepthImage, f64)> {
    let ds = cfg.depth_size;
    let mut depth = Vec::with_capacity(ds * ds);
    for row in 0..ds {
        let v = pixel_center(row, ds, cfg.surface_mm);
        for col in 0..ds {
            let u = pixel_center(col, ds, cfg.surface_mm);
            let (h, _, _) = dent(state, cfg, u, v);
            let noise: f64 = StandardNormal.sample(rng);
            depth.push((cfg.base_depth_mm - h + cfg.depth_noise_mm * noise).max(0.0));
        }
    }
    let rs = cfg.rgb_size;
    let norm = LIGHT.iter().map(|l| l * l).sum::<f64>().sqrt();
    let light = LIGHT.map(|l| l / norm);
    let mut rgb = Vec::with_capacity(rs * rs * 3);
    for row in 0..rs {
        let v = pixel_center(row, rs, cfg.surface_mm);
        for col in 0..rs {
            let u = pixel_center(col, rs, cfg.surface_mm);
            let (_, gu, gv) = dent(state, cfg, u, v);
            // the visible surface is z = -h(u, v) toward the camera
            let n = [gu, gv, 1.0];
            let len = (n[0] * n[0] + n[1] * n[1] + 1.0).sqrt();
            let lambert = (n.iter().zip(&light).map(|(a, b)| a * b).sum::<f64>() / len).max(0.0);
            let shade = AMBIENT + (1.0 - AMBIENT) * lambert;
            for albedo in ALBEDO {
                let noise: f64 = StandardNormal.sample(rng);
                rgb.push((albedo * shade + cfg.rgb_noise * noise).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let noise: f64 = StandardNormal.sample(rng);
    let fz = cfg.force(state.indentation) + cfg.force_noise_n * noise;
    Ok((RgbImage::new(rs, rs, rgb)?, DepthImage::new(ds, ds, depth)?, fz))
}

/// Renders frame `index` of a sequence with its own noise stream, so frames can
/// be produced in any order.
pub fn render_frame(state: &ToolState, cfg: &SceneConfig, index: usize) -> Result<(RgbImage, DepthImage, f64)> {
    render_frame_with(state, cfg, &mut frame_rng(cfg, index))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedDataset {
    pub frames: usize,
    /// SHA-256 over the manifest and every frame file, in manifest order.
    pub checksum: String,
}

fn rgb_name(i: usize) -> String {
    format!("{FRAMES_DIR}/rgb_{i:06}.ppm")
}

fn depth_name(i: usize) -> String {
    format!("{FRAMES_DIR}/depth_{i:06}.pgm")
}

/// Writes `frames/` and `manifest.jsonl` under `out_dir`.
pub fn generate_dataset(cfg: &SceneConfig, out_dir: impl AsRef<Path>) -> Result<GeneratedDataset> {
    let out_dir = out_dir.as_ref();
    let states = generate_trajectory(cfg)?;
    let frames_dir = out_dir.join(FRAMES_DIR);
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;

    let rendered: Vec<(Vec<u8>, Vec<u8>, f64)> = states
        .par_iter()
        .enumerate()
        .map(|(i, s)| render_frame(s, cfg, i).map(|(rgb, depth, fz)| (encode_ppm(&rgb), encode_pgm16(&depth), fz)))
        .collect::<Result<_>>()?;

    let mut clock = ChaCha8Rng::seed_from_u64(cfg.seed);
    clock.set_stream(0);
    let clock = &mut clock;
    let mut jitter = move || if clock.random::<bool>() { cfg.jitter_s } else { -cfg.jitter_s };
    let mut streams = Streams::default();
    let mut hasher = Sha256::new();
    for (i, (ppm, pgm, fz)) in rendered.iter().enumerate() {
        let t = i as f64 / cfg.fps;
        for (name, bytes) in [(rgb_name(i), ppm), (depth_name(i), pgm)] {
            let path = out_dir.join(&name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        streams.push(StreamRecord::file(StreamKind::Rgb, t, rgb_name(i)));
        streams.push(StreamRecord::file(StreamKind::Depth, t + jitter(), depth_name(i)));
        streams.push(StreamRecord::force(t + jitter(), *fz));
    }
    let manifest = streams.to_jsonl();
    hasher.update(manifest.as_bytes());
    for (ppm, pgm, _) in &rendered {
        hasher.update(ppm);
        hasher.update(pgm);
    }
    let path = out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, &manifest).map_err(|e| Error::io(&path, e))?;
    Ok(GeneratedDataset {
        frames: rendered.len(),
        checksum: hex::encode(hasher.finalize()),
    })
}
