//! Centered windows of `2n + 1` consecutive frames labeled by the middle frame.

use std::ops::RangeInclusive;

use crate::encoders::FeatureVector;
use crate::error::{Error, Result};

/// Frames per window in the reference configuration (`n = 7`).
pub const DEFAULT_WINDOW_LEN: usize = 15;
pub const DEFAULT_HALF_WIDTH: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// Row-major `(2n + 1) x width`, ordered `t - n ..= t + n`.
    pub features: Vec<f64>,
    pub width: usize,
    pub label: f64,
    pub center: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.features.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Window centers with full context in a sequence of `len` frames.
pub fn window_centers(len: usize, n: usize) -> Result<RangeInclusive<usize>> {
    if len < 2 * n + 1 {
        return Err(Error::Validation(format!(
            "sequence of {len} frames is shorter than a window of {}",
            2 * n + 1
        )));
    }
    Ok(n..=len - n - 1)
}

pub fn build_windows(features: &[FeatureVector], labels: &[f64], n: usize) -> Result<Vec<Window>> {
    if features.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} features but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let centers = window_centers(features.len(), n)?;
    let width = features[0].width();
    if let Some(i) = features.iter().position(|f| f.width() != width) {
        return Err(Error::Shape(format!("feature {i} has width {}, expected {width}", features[i].width())));
    }
    if features.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::Validation("features are not time-ordered".into()));
    }
    Ok(centers
        .map(|c| Window {
            features: features[c - n..=c + n].iter().flat_map(|f| f.values.iter().copied()).collect(),
            width,
            label: labels[c],
            center: c,
        })
        .collect())
}
