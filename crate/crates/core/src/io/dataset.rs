//! Dataset directory: `manifest.jsonl` plus `frames/` holding PPM and PGM files.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::image::{read_pgm16, read_ppm, DepthImage, RgbImage};
use crate::io::manifest::{read_manifest, Streams};
use crate::io::sync::synchronize_streams;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const FRAMES_DIR: &str = "frames";

/// A synchronized observation with its images loaded.
#[derive(Debug, Clone)]
pub struct Frame {
    pub t: f64,
    pub rgb: RgbImage,
    pub depth: DepthImage,
    pub fz: f64,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub root: PathBuf,
    pub frames: Vec<Frame>,
    pub dropped: usize,
}

impl LoadedDataset {
    pub fn labels(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.fz).collect()
    }

    /// Largest |fz| over every loaded frame.
    pub fn max_abs_force(&self) -> f64 {
        self.frames.iter().map(|f| f.fz.abs()).fold(0.0, f64::max)
    }
}

pub fn load_dataset(root: impl AsRef<Path>, tolerance: f64) -> Result<LoadedDataset> {
    let root = root.as_ref();
    let streams: Streams = read_manifest(root.join(MANIFEST_FILE))?;
    let synced = synchronize_streams(&streams, tolerance)?;
    let mut frames = Vec::with_capacity(synced.frames.len());
    for s in &synced.frames {
        let rgb_path = streams.rgb[s.rgb]
            .path()
            .ok_or_else(|| Error::Validation("rgb record without file".into()))?;
        let depth_path = streams.depth[s.depth]
            .path()
            .ok_or_else(|| Error::Validation("depth record without file".into()))?;
        frames.push(Frame {
            t: s.t,
            rgb: read_ppm(root.join(rgb_path))?,
            depth: read_pgm16(root.join(depth_path))?,
            fz: s.fz,
        });
    }
    if let Some(first) = frames.first() {
        let (rw, rh, dw, dh) = (first.rgb.width(), first.rgb.height(), first.depth.width(), first.depth.height());
        if let Some(bad) = frames.iter().position(|f| {
            (f.rgb.width(), f.rgb.height(), f.depth.width(), f.depth.height()) != (rw, rh, dw, dh)
        }) {
            return Err(Error::Shape(format!("frame {bad} has different image dimensions than frame 0")));
        }
    }
    Ok(LoadedDataset {
        root: root.to_path_buf(),
        frames,
        dropped: synced.dropped,
    })
}
