//! Per-frame network inputs, prepared once from a loaded dataset.

use rayon::prelude::*;

use crate::encoders::points::cloud_to_input;
use crate::encoders::rgb::rgb_to_input;
use crate::error::{Error, Result};
use crate::geometry::{prepare_cloud, CameraIntrinsics};
use crate::io::dataset::LoadedDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStore {
    pub times: Vec<f64>,
    pub labels: Vec<f64>,
    pub rgb_height: usize,
    pub rgb_width: usize,
    pub num_points: usize,
    rgb: Vec<f64>,
    points: Vec<f64>,
}

impl FrameStore {
    pub fn from_dataset(ds: &LoadedDataset, intrinsics: &CameraIntrinsics, num_points: usize) -> Result<Self> {
        let first = ds
            .frames
            .first()
            .ok_or_else(|| Error::Validation("dataset has no synchronized frames".into()))?;
        let (h, w) = (first.rgb.height(), first.rgb.width());
        let clouds: Vec<Vec<f64>> = ds
            .frames
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                prepare_cloud(&f.depth, intrinsics, num_points)
                    .map(|pc| cloud_to_input(&pc))
                    .map_err(|e| Error::Validation(format!("frame {i}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            times: ds.frames.iter().map(|f| f.t).collect(),
            labels: ds.labels(),
            rgb_height: h,
            rgb_width: w,
            num_points,
            rgb: ds.frames.iter().flat_map(|f| rgb_to_input(&f.rgb)).collect(),
            points: clouds.concat(),
        })
    }

    /// Builds a store from already-preprocessed inputs: RGB as `[frames][h][w][3]`
    /// in network units and clouds as `[frames][num_points][xyz]`.
    pub fn from_parts(
        times: Vec<f64>,
        labels: Vec<f64>,
        (rgb_height, rgb_width): (usize, usize),
        rgb: Vec<f64>,
        num_points: usize,
        points: Vec<f64>,
    ) -> Result<Self> {
        let n = times.len();
        if labels.len() != n || rgb.len() != n * rgb_height * rgb_width * 3 || points.len() != n * num_points * 3 {
            return Err(Error::Shape(format!("frame store inputs disagree on {n} frames")));
        }
        Ok(Self {
            times,
            labels,
            rgb_height,
            rgb_width,
            num_points,
            rgb,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rgb_frame(&self, i: usize) -> &[f64] {
        let n = self.rgb_height * self.rgb_width * 3;
        &self.rgb[i * n..(i + 1) * n]
    }

    pub fn points_frame(&self, i: usize) -> &[f64] {
        let n = self.num_points * 3;
        &self.points[i * n..(i + 1) * n]
    }

    /// Largest |fz| over all frames.
    pub fn max_abs_force(&self) -> f64 {
        self.labels.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}
