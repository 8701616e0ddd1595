//! Nearest-sample alignment of depth and force streams onto the RGB stream.

use crate::error::{Error, Result};
use crate::io::manifest::{StreamRecord, Streams};

/// Synchronization bound used when none is configured: 10 ms.
pub const DEFAULT_TOLERANCE: f64 = 0.010;

/// One RGB frame with its matched depth and force records (indices into the streams).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncedFrame {
    pub t: f64,
    pub rgb: usize,
    pub depth: usize,
    pub force: usize,
    pub fz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult {
    pub frames: Vec<SyncedFrame>,
    /// RGB frames without a depth or force partner inside the tolerance.
    pub dropped: usize,
}

/// Index of the record nearest to `t`; ties resolve to the earlier record.
pub fn nearest(times: &[f64], t: f64) -> Option<usize> {
    if times.is_empty() {
        return None;
    }
    let after = times.partition_point(|&x| x < t);
    let candidates = [after.checked_sub(1), (after < times.len()).then_some(after)];
    candidates
        .into_iter()
        .flatten()
        .min_by(|&a, &b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()).then(a.cmp(&b)))
}

fn times(stream: &[StreamRecord]) -> Vec<f64> {
    stream.iter().map(|r| r.t).collect()
}

pub fn synchronize(
    rgb: &[StreamRecord],
    depth: &[StreamRecord],
    force: &[StreamRecord],
    tolerance: f64,
) -> Result<SyncResult> {
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        return Err(Error::Validation(format!("tolerance {tolerance} must be finite and >= 0")));
    }
    for (name, s) in [("rgb", rgb), ("depth", depth), ("force", force)] {
        if s.is_empty() {
            return Err(Error::Validation(format!("{name} stream is empty")));
        }
    }
    let streams = Streams {
        rgb: rgb.to_vec(),
        depth: depth.to_vec(),
        force: force.to_vec(),
    };
    streams.validate()?;

    let depth_t = times(depth);
    let force_t = times(force);
    let mut frames = Vec::with_capacity(rgb.len());
    let mut dropped = 0;
    for (i, r) in rgb.iter().enumerate() {
        let (Some(d), Some(f)) = (nearest(&depth_t, r.t), nearest(&force_t, r.t)) else {
            dropped += 1;
            continue;
        };
        let fz = force[f]
            .fz()
            .ok_or_else(|| Error::Validation(format!("force record {f} carries no fz")))?;
        if (depth_t[d] - r.t).abs() <= tolerance && (force_t[f] - r.t).abs() <= tolerance {
            frames.push(SyncedFrame {
                t: r.t,
                rgb: i,
                depth: d,
                force: f,
                fz,
            });
        } else {
            dropped += 1;
        }
    }
    Ok(SyncResult { frames, dropped })
}

pub fn synchronize_streams(streams: &Streams, tolerance: f64) -> Result<SyncResult> {
    synchronize(&streams.rgb, &streams.depth, &streams.force, tolerance)
}
