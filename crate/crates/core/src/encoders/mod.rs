//! Per-frame spatial features: RGB encoder, point encoder and their concatenation.

pub mod points;
pub mod rgb;

pub use points::{encode_points, PointEncoder, PointEncoderConfig};
pub use rgb::{encode_rgb, RgbEncoder, RgbEncoderConfig};

use crate::error::{Error, Result};

/// Per-frame feature `[rgb ‖ points]` with its timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub t: f64,
    pub values: Vec<f64>,
    pub rgb_width: usize,
    pub point_width: usize,
}

impl FeatureVector {
    pub fn width(&self) -> usize {
        self.values.len()
    }
}

/// Concatenate with the RGB part first. `expected` pins the two widths when given.
pub fn concat_features(
    rgb: &[f64],
    points: &[f64],
    expected: Option<(usize, usize)>,
    t: f64,
) -> Result<FeatureVector> {
    if let Some((dr, dp)) = expected {
        if rgb.len() != dr || points.len() != dp {
            return Err(Error::Shape(format!(
                "feature widths {} + {} do not match expected {dr} + {dp}",
                rgb.len(),
                points.len()
            )));
        }
    }
    let mut values = Vec::with_capacity(rgb.len() + points.len());
    values.extend_from_slice(rgb);
    values.extend_from_slice(points);
    Ok(FeatureVector {
        t,
        values,
        rgb_width: rgb.len(),
        point_width: points.len(),
    })
}
