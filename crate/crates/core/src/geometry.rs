//! Depth unprojection into a centered point cloud, unit-sphere scaling and
//! deterministic stride downsampling.
//!
//! Pixel convention: `x_D` is the column index, `y_D` the row index, origin at
//! the top-left corner. Zero-depth pixels are invalid and skipped.

use crate::error::{Error, Result};
use crate::io::image::DepthImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::Validation(format!("focal lengths must be positive, got fx={fx} fy={fy}")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::Validation("principal point must be finite".into()));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Pinhole camera looking at the center of a `width`x`height` image.
    pub fn centered(width: usize, height: usize, focal: f64) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    /// Per-axis mean removed during unprojection, in camera-frame millimeters.
    pub centroid: [f64; 3],
    /// Divisor applied by [`normalize_unit_sphere`]; 1 before normalization.
    pub scale: f64,
    pub normalized: bool,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| norm(p)).fold(0.0, f64::max)
    }
}

fn norm(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Back-project every valid pixel and subtract the per-axis mean over valid pixels.
pub fn unproject(depth: &DepthImage, k: &CameraIntrinsics) -> Result<PointCloud> {
    let mut raw = Vec::with_capacity(depth.width() * depth.height());
    for row in 0..depth.height() {
        for col in 0..depth.width() {
            let z = depth.at(col, row);
            if z <= 0.0 {
                continue;
            }
            let x = (col as f64 - k.cx) * z / k.fx;
            let y = (row as f64 - k.cy) * z / k.fy;
            raw.push([x, y, z]);
        }
    }
    if raw.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = raw.len() as f64;
    let mut centroid = [0.0; 3];
    for p in &raw {
        for a in 0..3 {
            centroid[a] += p[a];
        }
    }
    for c in &mut centroid {
        *c /= n;
    }
    for p in &mut raw {
        for a in 0..3 {
            p[a] -= centroid[a];
        }
    }
    Ok(PointCloud {
        points: raw,
        centroid,
        scale: 1.0,
        normalized: false,
    })
}

/// Divide a centered cloud by its largest point norm. An all-origin cloud is
/// returned unchanged with scale 1.
pub fn normalize_unit_sphere(pc: &PointCloud) -> Result<PointCloud> {
    if pc.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let s = pc.max_norm();
    let mut out = pc.clone();
    out.normalized = true;
    if s == 0.0 {
        out.scale = 1.0;
        return Ok(out);
    }
    for p in &mut out.points {
        for v in p.iter_mut() {
            *v /= s;
        }
    }
    // the divisor composes with any earlier normalization so scale always maps back to camera units
    out.scale = pc.scale * s;
    Ok(out)
}

/// Stride indices `floor(k * n / m)` for `k in 0..m`, or the identity when `n <= m`.
pub fn downsample_indices(n: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::Validation("downsample target must be at least 1".into()));
    }
    if n <= m {
        return Ok((0..n).collect());
    }
    Ok((0..m).map(|k| ((k as u128 * n as u128) / m as u128) as usize).collect())
}

pub fn downsample_uniform(pc: &PointCloud, m: usize) -> Result<PointCloud> {
    let idx = downsample_indices(pc.len(), m)?;
    Ok(PointCloud {
        points: idx.iter().map(|&i| pc.points[i]).collect(),
        ..pc.clone()
    })
}

/// Full preprocessing for the point encoder: unproject, normalize, and bring the
/// cloud to exactly `m` points. Clouds that are too small are padded by cycling
/// through their points, which leaves any max-pooled encoding unchanged.
pub fn prepare_cloud(depth: &DepthImage, k: &CameraIntrinsics, m: usize) -> Result<PointCloud> {
    let pc = normalize_unit_sphere(&unproject(depth, k)?)?;
    let mut pc = downsample_uniform(&pc, m)?;
    if pc.len() < m {
        let n = pc.len();
        pc.points = (0..m).map(|i| pc.points[i % n]).collect();
    }
    Ok(pc)
}
